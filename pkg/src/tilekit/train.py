"""Self-supervised training: random target shapes crop the superset, each
crop's graph drives one optimizer step against the product loss.

Shapes are star-sampled polygons with uniform vertex counts, scaled to a
uniform fraction of the superset extent and dropped at a uniform pose.
Validation shapes are generated from a separate stream and never touched
by training steps.  Early stopping watches the epoch validation loss.
"""

from __future__ import annotations

import json
import logging
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .geom import Polygon, make_polygon, GeometryError
from .graph import build_graph, crop_superset
from .loss import LossWeights, tiling_loss
from .model import TileNetwork, save_weights, load_weights, WeightFormatError
from .tileset import Superset

log = logging.getLogger("tilekit.train")


class GenerationFailed(RuntimeError):
    """Random-shape rejection sampling exhausted its attempt budget."""


@dataclass
class TrainConfig:
    epochs: int = 5
    train_shapes: int = 500
    val_shapes: int = 100
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    vertex_range: tuple[int, int] = (3, 20)
    size_range: tuple[float, float] = (0.3, 0.8)
    grad_clip: float | None = 10.0
    weight_decay: float = 0.1
    checkpoint_every: int = 0  # iterations; 0 = checkpoints only on improvement
    patience: int = 2
    min_nodes: int = 3
    seed: int = 0
    combine: str = "product"
    loss_weights: LossWeights = field(default_factory=LossWeights)
    max_attempts: int = 10_000


class Adam:
    """Standard Adam over the model's parameter list, with global-norm
    gradient clipping (dense overlap graphs occasionally emit huge loss
    gradients that would otherwise destabilize the run)."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 clip_norm: float | None = 10.0,
                 weight_decay: float = 0.0):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.weight_decay = weight_decay  # decoupled (AdamW-style)
        self.t = 0
        self.m = [np.zeros_like(p.data) for _, p in self.params]
        self.v = [np.zeros_like(p.data) for _, p in self.params]

    def _clip_gradients(self):
        if self.clip_norm is None:
            return
        total = 0.0
        for _, p in self.params:
            if p.grad is not None:
                total += float((p.grad.astype(np.float64) ** 2).sum())
        norm = np.sqrt(total)
        if norm > self.clip_norm:
            scale = np.float32(self.clip_norm / norm)
            for _, p in self.params:
                if p.grad is not None:
                    p.grad *= scale

    def step(self):
        self._clip_gradients()
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for (name, p), m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g is None:
                continue
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            update = (self.lr * (m / bias1)
                      / (np.sqrt(v / bias2) + self.eps)).astype(np.float32)
            if self.weight_decay:
                update = update + np.float32(self.lr * self.weight_decay) * p.data
            p.data -= update


def random_shape(rng: np.random.Generator, superset_bounds, cfg: TrainConfig) -> Polygon:
    """One random simple polygon posed over the superset extent.

    Vertex count is uniform over the configured range; the shape's longest
    bounding-box side is a uniform fraction of the superset's shorter
    bounding-box side; position and orientation are uniform.  Invalid
    (self-intersecting or degenerate) draws are discarded and redrawn.
    """
    x0, y0, x1, y1 = superset_bounds
    span = min(x1 - x0, y1 - y0)
    lo_n, hi_n = cfg.vertex_range
    for _ in range(cfg.max_attempts):
        n = int(rng.integers(lo_n, hi_n + 1))
        angles = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=n))
        radii = rng.uniform(0.25, 1.0, size=n)
        rot = rng.uniform(0.0, 2.0 * np.pi)
        pts = np.column_stack([radii * np.cos(angles + rot),
                               radii * np.sin(angles + rot)])
        scale = rng.uniform(*cfg.size_range) * span
        width, height = pts.max(axis=0) - pts.min(axis=0)
        target = scale / max(width, height)
        pts = pts * target
        w, h = pts.max(axis=0) - pts.min(axis=0)
        tx = rng.uniform(x0, max(x0, x1 - w)) - pts[:, 0].min()
        ty = rng.uniform(y0, max(y0, y1 - h)) - pts[:, 1].min()
        pts = pts + (tx, ty)
        try:
            return make_polygon(pts)
        except GeometryError:
            continue
    raise GenerationFailed(f"no valid shape in {cfg.max_attempts} attempts")


def train_step(model: TileNetwork, graph, optimizer: Adam,
               weights: LossWeights = LossWeights(),
               combine: str = "product") -> float:
    """One forward/loss/backward/update cycle; returns the pre-update loss."""
    model.zero_grad()
    x = model.forward(graph, record=True)
    total, _ = tiling_loss(x, graph, weights, combine)
    total.backward()
    optimizer.step()
    return float(total.data)


def validation_loss(model: TileNetwork, graphs,
                    weights: LossWeights = LossWeights(),
                    combine: str = "product") -> float:
    vals = []
    for g in graphs:
        x = model.forward(g, record=False)
        total, _ = tiling_loss(x, g, weights, combine)
        vals.append(float(total.data))
    if not vals:
        raise ValueError("no validation graphs")
    return float(np.mean(vals))


ADAM_MAGIC = b"ADAM"


def save_checkpoint(model: TileNetwork, optimizer: Adam, path):
    """Weights file with the optimizer state appended."""
    save_weights(model, path)
    with open(path, "ab") as fh:
        fh.write(ADAM_MAGIC)
        fh.write(struct.pack("<q", optimizer.t))
        for buf in (optimizer.m, optimizer.v):
            for arr in buf:
                fh.write(arr.astype("<f4").tobytes())


def load_checkpoint(path, expected_config=None, lr=1e-3,
                    beta1=0.9, beta2=0.999, eps=1e-8):
    model = load_weights(path, expected_config)
    optimizer = Adam(model.parameters(), lr=lr, beta1=beta1, beta2=beta2,
                     eps=eps)
    with open(path, "rb") as fh:
        raw = fh.read()
    marker = raw.rfind(ADAM_MAGIC)
    if marker == -1:
        return model, optimizer
    off = marker + 4
    (optimizer.t,) = struct.unpack_from("<q", raw, off)
    off += 8
    for buf in (optimizer.m, optimizer.v):
        for i, arr in enumerate(buf):
            count = arr.size * 4
            chunk = raw[off:off + count]
            if len(chunk) != count:
                raise WeightFormatError("truncated optimizer state")
            buf[i] = np.frombuffer(chunk, dtype="<f4").reshape(arr.shape).copy()
            off += count
    return model, optimizer


@dataclass
class TrainResult:
    initial_val_loss: float
    best_val_loss: float
    epochs_run: int
    iterations: int
    metrics_path: str
    best_checkpoint: str
    stopped_early: bool


def _shape_graphs(ss, shapes, min_nodes):
    from .geom import Region
    graphs = []
    for shape in shapes:
        placements = crop_superset(ss, Region(shape))
        if len(placements) < min_nodes:
            graphs.append(None)
            continue
        graphs.append(build_graph(placements, ss))
    return graphs


def train(model: TileNetwork, ss: Superset, cfg: TrainConfig,
          out_dir, shapes: tuple[list, list] | None = None) -> TrainResult:
    """Full crop-train loop with per-epoch validation, early stopping, and
    best-checkpoint retention.

    `shapes` optionally supplies explicit (train, validation) polygon lists
    in place of the random-shape streams.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.jsonl"
    best_path = out / "best.ckpt"

    bounds = ss.bounds()
    epoch_rng = np.random.default_rng(
        np.random.SeedSequence(entropy=cfg.seed, spawn_key=(3,)))

    if shapes is not None:
        train_shapes, val_shapes = shapes
    else:
        shape_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=cfg.seed, spawn_key=(1,)))
        val_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=cfg.seed, spawn_key=(2,)))
        train_shapes = [random_shape(shape_rng, bounds, cfg)
                        for _ in range(cfg.train_shapes)]
        val_shapes = [random_shape(val_rng, bounds, cfg)
                      for _ in range(cfg.val_shapes)]
    log.info("building %d train / %d val graphs", len(train_shapes),
             len(val_shapes))
    train_graphs = _shape_graphs(ss, train_shapes, cfg.min_nodes)
    val_graphs = [g for g in _shape_graphs(ss, val_shapes, cfg.min_nodes)
                  if g is not None]

    optimizer = Adam(model.parameters(), lr=cfg.learning_rate,
                     beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.adam_eps,
                     clip_norm=cfg.grad_clip,
                     weight_decay=cfg.weight_decay)
    initial_val = validation_loss(model, val_graphs, cfg.loss_weights,
                                  cfg.combine)
    best_val = initial_val
    save_checkpoint(model, optimizer, best_path)
    strikes = 0
    iteration = 0
    epochs_run = 0
    stopped_early = False

    with open(metrics_path, "w") as metrics:
        def emit(**row):
            metrics.write(json.dumps(row, sort_keys=True) + "\n")

        emit(iter=iteration, train_loss=None, val_loss=initial_val,
             graph_size=None, wall_ms=None)
        for epoch in range(cfg.epochs):
            order = epoch_rng.permutation(len(train_graphs))
            for gi in order:
                g = train_graphs[gi]
                if g is None:
                    log.info("skipping shape %d: graph below %d nodes",
                             gi, cfg.min_nodes)
                    continue
                t0 = time.perf_counter()
                loss_val = train_step(model, g, optimizer, cfg.loss_weights,
                                      cfg.combine)
                iteration += 1
                emit(iter=iteration, train_loss=loss_val, val_loss=None,
                     graph_size=len(g),
                     wall_ms=(time.perf_counter() - t0) * 1000.0)
                if cfg.checkpoint_every and iteration % cfg.checkpoint_every == 0:
                    save_checkpoint(model, optimizer,
                                    out / f"iter{iteration:06d}.ckpt")
            epochs_run = epoch + 1
            val = validation_loss(model, val_graphs, cfg.loss_weights,
                                  cfg.combine)
            emit(iter=iteration, train_loss=None, val_loss=val,
                 graph_size=None, wall_ms=None)
            log.info("epoch %d: val loss %.4f (best %.4f)", epoch, val,
                     best_val)
            if val < best_val:
                best_val = val
                strikes = 0
                save_checkpoint(model, optimizer, best_path)
            else:
                strikes += 1
                if strikes > cfg.patience:
                    stopped_early = True
                    break
    return TrainResult(initial_val, best_val, epochs_run, iteration,
                       str(metrics_path), str(best_path), stopped_early)
