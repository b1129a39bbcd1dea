"""Estimator-style facade: fit() trains the placement-scoring network for a
tile set (self-supervised, no labels), predict() tiles target regions.

Composes with scikit-learn tooling (get_params/set_params/clone); the
heavy lifting lives in the tileset/train/solve modules.
"""

from __future__ import annotations

import json
import tempfile
from importlib import resources
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .geom import GeometryError, Polygon, Region, make_polygon
from .graph import build_graph, crop_superset
from .loss import LossWeights
from .model import ModelConfig, TileNetwork
from .solve import Policy, Solution, tile_region
from .tileset import TileSet, build_superset, load_tileset
from .train import TrainConfig, train


def as_region(obj) -> Region:
    """Validation helper: accept a Region, Polygon, vertex array, or
    {'outer':..., 'holes':...} mapping."""
    if isinstance(obj, Region):
        return obj
    if isinstance(obj, Polygon):
        return Region(obj)
    if isinstance(obj, dict):
        outer = make_polygon(np.asarray(obj["outer"], dtype=float))
        holes = [Polygon(np.asarray(h, dtype=float))
                 for h in obj.get("holes", [])]
        return Region(outer, holes)
    arr = np.asarray(obj, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 3:
        raise GeometryError(
            f"expected an (n, 2) vertex array with n >= 3, got {arr.shape}")
    return Region(make_polygon(arr))


def resolve_tileset(spec) -> TileSet:
    """Accept a TileSet, a descriptor dict, a JSON path, or the name of a
    bundled tile set."""
    if isinstance(spec, TileSet):
        return spec
    if isinstance(spec, dict):
        return load_tileset(spec)
    path = Path(spec)
    if path.suffix == ".json" and path.exists():
        return load_tileset(json.loads(path.read_text()))
    bundled = resources.files("tilekit.data") / f"{spec}.json"
    if bundled.is_file():
        return load_tileset(json.loads(bundled.read_text()))
    raise FileNotFoundError(f"no tile set at {spec!r} and no bundled tile "
                            f"set of that name")


def coerce_regions(X) -> tuple[list[Region], bool]:
    """Resolve X into a region list; second value reports whether X was a
    single region (a bare (n, 2) vertex array counts as one region)."""
    if isinstance(X, (Region, Polygon, dict)):
        return [as_region(X)], True
    try:
        arr = np.asarray(X, dtype=float)
    except (ValueError, TypeError):
        arr = None
    if arr is not None and arr.ndim == 2 and arr.shape[1] == 2:
        return [as_region(arr)], True
    return [as_region(x) for x in X], False


class GraphTiler(BaseEstimator):
    """Learn-to-tile estimator.

    fit() builds the candidate superset for the configured tile set and
    trains the scoring network on random crops; predict() returns tiling
    solutions for target regions.  All solver policies remain available
    via the `policy` parameter ("gnn", "greedy", "random").
    """

    def __init__(self, tileset="square_domino", rings=None, layers=6,
                 channels=32, epochs=5, train_shapes=500, val_shapes=100,
                 learning_rate=1e-3, patience=2, policy="gnn", runs=20,
                 crops=4, round_cap=50, jobs=1, work_dir=None,
                 random_state=0):
        self.tileset = tileset
        self.rings = rings
        self.layers = layers
        self.channels = channels
        self.epochs = epochs
        self.train_shapes = train_shapes
        self.val_shapes = val_shapes
        self.learning_rate = learning_rate
        self.patience = patience
        self.policy = policy
        self.runs = runs
        self.crops = crops
        self.round_cap = round_cap
        self.jobs = jobs
        self.work_dir = work_dir
        self.random_state = random_state

    def _check_fitted(self):
        if not hasattr(self, "superset_"):
            raise NotFittedError("call fit() before predicting")

    def fit(self, X=None, y=None):
        """Build the superset and train the network.

        X optionally supplies training shapes (list of vertex arrays or
        Polygons); by default random shapes are generated per the training
        protocol.  y is ignored (training is self-supervised).
        """
        ts = resolve_tileset(self.tileset)
        rings = self.rings if self.rings is not None else ts.default_rings
        self.tileset_ = ts
        self.superset_ = build_superset(ts, rings)
        cfg = ModelConfig(num_tile_types=ts.num_tile_types,
                          num_poses=self.superset_.pose_count,
                          layers=self.layers, channels=self.channels,
                          seed=self.random_state)
        self.model_ = TileNetwork(cfg)
        tcfg = TrainConfig(epochs=self.epochs,
                           train_shapes=self.train_shapes,
                           val_shapes=self.val_shapes,
                           learning_rate=self.learning_rate,
                           patience=self.patience,
                           seed=self.random_state)
        shapes = None
        if X is not None:
            provided = [as_region(x).outer for x in X]
            split = max(1, len(provided) * 4 // 5)
            if len(provided) < 2:
                raise ValueError("need at least 2 shapes to fit (train+val)")
            shapes = (provided[:split], provided[split:])
        work = self.work_dir or tempfile.mkdtemp(prefix="tilekit-fit-")
        self.train_result_ = train(self.model_, self.superset_, tcfg, work,
                                   shapes=shapes)
        return self

    def _policy(self) -> Policy:
        if self.policy == "gnn":
            return Policy("gnn", model=self.model_)
        return Policy(self.policy)

    def predict(self, X) -> Solution | list[Solution]:
        """Tile one region (returns a Solution) or a list of regions."""
        self._check_fitted()
        regions, single = coerce_regions(X)
        out = []
        for i, region in enumerate(regions):
            sol = tile_region(self._policy(), self.tileset_, self.superset_,
                              region, k=self.crops, runs=self.runs,
                              master_seed=self.random_state + i,
                              round_cap=self.round_cap, jobs=self.jobs)
            out.append(sol)
        return out[0] if single else out

    def predict_proba(self, X) -> np.ndarray | list[np.ndarray]:
        """Network selection probabilities over each region's candidate
        placements (identity crop pose)."""
        self._check_fitted()
        regions, single = coerce_regions(X)
        out = []
        for region in regions:
            placements = crop_superset(self.superset_, region)
            if not placements:
                out.append(np.zeros(0, dtype=np.float32))
                continue
            g = build_graph(placements, self.superset_)
            out.append(self.model_.predict(g))
        return out[0] if single else out

    def score(self, X, y=None) -> float:
        """Mean tiling coverage over the given regions."""
        regions, _ = coerce_regions(X)
        sols = self.predict(regions)
        return float(np.mean([s.metrics["coverage"] for s in sols]))
