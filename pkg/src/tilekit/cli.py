"""Command-line interface.

Subcommands: superset (build + cache), train, tile, bench, render, serve.
Every run prints the resolved seed; TILING_LOG controls log level; exit
codes: 0 ok, 1 usage/input error, 2 capacity/limit error, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from .documents import (
    ParseError,
    VersionError,
    read_solution,
    read_superset,
    read_tileset,
    region_from_dict,
    solution_to_dict,
    write_solution,
    write_superset,
)
from .estimator import as_region, resolve_tileset
from .geom import GeometryError, Region, RigidTransform, make_polygon, \
    transform_region
from .graph import build_graph, mean_degree
from .loss import LossWeights
from .model import ConfigMismatch, ModelConfig, TileNetwork, \
    WeightFormatError, load_weights, save_weights
from .render import render_svg
from .solve import NoCandidates, Policy, crop_superset, tile_region
from .tileset import SupersetTooLarge, SymmetryClosureError, TileSetError, \
    build_superset
from .train import TrainConfig, train

log = logging.getLogger("tilekit.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CAPACITY = 2
EXIT_INTERNAL = 3


def _setup_logging():
    level = os.environ.get("TILING_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _resolve_seed(args) -> int:
    seed = args.seed
    if seed is None:
        seed = int.from_bytes(os.urandom(4), "little")
    print(f"seed: {seed}")
    return seed


def _load_tileset(path):
    ts_path = Path(path)
    if not ts_path.exists():
        bundled = resolve_tileset(path)
        return bundled
    return read_tileset(ts_path)


def _load_superset(args, ts):
    if getattr(args, "superset", None):
        return read_superset(args.superset, ts)
    rings = getattr(args, "rings", None) or ts.default_rings
    return build_superset(ts, rings, cap=getattr(args, "cap", 20_000))


def _read_shape(path) -> Region:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict) and "outer" in data:
        return region_from_dict(data, where=str(path))
    return as_region(data)


def cmd_superset(args) -> int:
    ts = _load_tileset(args.tileset)
    ss = build_superset(ts, args.rings if args.rings is not None
                        else ts.default_rings, cap=args.cap,
                        validate_symmetry=not args.no_validate_symmetry)
    print(f"placements: {len(ss)}")
    g = build_graph(ss.placements, ss)
    print(f"overlap edges: {len(g.overlap_edges)}")
    print(f"neighbor edges: {len(g.neighbor_edges)}")
    print(f"relative poses: {ss.pose_count}")
    print(f"mean degree: {mean_degree(g):.3f}")
    if args.out:
        write_superset(ss, args.out)
        print(f"superset cache written to {args.out}")
    return EXIT_OK


def cmd_train(args, seed) -> int:
    ts = _load_tileset(args.tileset)
    ss = _load_superset(args, ts)
    cfg = ModelConfig(num_tile_types=ts.num_tile_types,
                      num_poses=ss.pose_count, layers=args.layers,
                      channels=args.channels, seed=seed)
    model = TileNetwork(cfg)
    tcfg = TrainConfig(epochs=args.epochs, train_shapes=args.train_shapes,
                       val_shapes=args.val_shapes, learning_rate=args.lr,
                       patience=args.patience, seed=seed,
                       weight_decay=args.weight_decay,
                       checkpoint_every=args.checkpoint_every)
    result = train(model, ss, tcfg, args.out)
    print(f"initial validation loss: {result.initial_val_loss:.6f}")
    print(f"best validation loss: {result.best_val_loss:.6f}")
    print(f"epochs run: {result.epochs_run} (early stop: "
          f"{result.stopped_early})")
    print(f"metrics: {result.metrics_path}")
    weights_path = Path(args.out) / "weights.tgnn"
    best_model, _ = _best_model(result, cfg)
    save_weights(best_model, weights_path)
    print(f"weights: {weights_path}")
    return EXIT_OK


def _best_model(result, cfg):
    from .train import load_checkpoint
    return load_checkpoint(result.best_checkpoint, expected_config=cfg)


def _policy_from_args(args, ts, ss) -> Policy:
    if args.policy == "gnn":
        if not args.weights:
            raise SystemExit2("--policy gnn requires --weights")
        model = load_weights(args.weights, expected_config=None)
        if (model.config.num_tile_types != ts.num_tile_types
                or model.config.num_poses != ss.pose_count):
            raise ConfigMismatch(
                f"weights expect {model.config.num_tile_types} tile types /"
                f" {model.config.num_poses} poses; tile set has "
                f"{ts.num_tile_types}/{ss.pose_count}")
        return Policy("gnn", model=model)
    return Policy(args.policy)


class SystemExit2(Exception):
    """Usage error raised past argparse."""


def cmd_tile(args, seed) -> int:
    ts = _load_tileset(args.tileset)
    ss = _load_superset(args, ts)
    region = _read_shape(args.shape)
    policy = _policy_from_args(args, ts, ss)
    sol = tile_region(policy, ts, ss, region, k=args.k, runs=args.runs,
                      master_seed=seed, round_cap=args.round_cap,
                      jobs=args.jobs)
    m = sol.metrics
    print(f"coverage: {m['coverage']:.4f}")
    print(f"holes: {m['holes']}")
    print(f"tiles: {m['tiles']}")
    print(f"rounds: {m['rounds']}")
    print(f"wall_ms: {m['wall_ms']:.1f}")
    config = {"policy": args.policy, "runs": args.runs, "k": args.k,
              "round_cap": args.round_cap, "tileset": ts.name}
    doc = solution_to_dict(sol, ts, region, seed, config)
    if args.out:
        write_solution(doc, args.out)
        print(f"solution: {args.out}")
    if args.svg:
        posed = transform_region(region, sol.pose)
        crop = crop_superset(ss, region, sol.pose)
        Path(args.svg).write_text(
            render_svg(sol.placements, crop, posed, ts))
        print(f"svg: {args.svg}")
    return EXIT_OK


def cmd_bench(args, seed) -> int:
    ts = _load_tileset(args.tileset)
    ss = _load_superset(args, ts)
    shape_files = sorted(Path(args.shapes).glob("*.json"))
    if not shape_files:
        print(f"error: no shape documents in {args.shapes}", file=sys.stderr)
        return EXIT_USAGE
    sizes = [float(s) for s in args.sizes.split(",")]
    policies = args.policies.split(",")
    x0, y0, x1, y1 = ss.bounds()
    span = min(x1 - x0, y1 - y0)
    rows = []
    for shape_file in shape_files:
        base = _read_shape(shape_file)
        for size in sizes:
            region = _scale_region(base, size * span, (x0, y0, x1, y1))
            candidates = len(crop_superset(ss, region))
            for policy_name in policies:
                args.policy = policy_name
                policy = _policy_from_args(args, ts, ss)
                t0 = time.perf_counter()
                try:
                    sol = tile_region(policy, ts, ss, region, k=args.k,
                                      runs=args.runs, master_seed=seed,
                                      jobs=args.jobs)
                    coverage = sol.metrics["coverage"]
                    holes = sol.metrics["holes"]
                except NoCandidates:
                    coverage, holes = 0.0, 0
                wall = (time.perf_counter() - t0) * 1000.0
                rows.append({
                    "shape": shape_file.stem, "size": size,
                    "policy": policy_name, "n_candidates": candidates,
                    "coverage": f"{coverage:.6f}", "holes": holes,
                    "wall_ms": f"{wall:.2f}"})
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=[
            "shape", "size", "policy", "n_candidates", "coverage",
            "holes", "wall_ms"])
        writer.writeheader()
        writer.writerows(rows)
    print(f"bench rows: {len(rows)} -> {args.out}")
    return EXIT_OK


def _scale_region(region: Region, target: float, bounds) -> Region:
    rx0, ry0, rx1, ry1 = region.bounds()
    scale = target / max(rx1 - rx0, ry1 - ry0)
    cx = (bounds[0] + bounds[2]) / 2 - scale * (rx0 + rx1) / 2
    cy = (bounds[1] + bounds[3]) / 2 - scale * (ry0 + ry1) / 2

    def xform(p):
        return make_polygon(p.vertices * scale + (cx, cy))
    from .geom import Polygon
    return Region(xform(region.outer),
                  [Polygon(h.vertices * scale + (cx, cy))
                   for h in region.holes])


def cmd_render(args) -> int:
    doc = read_solution(args.solution)
    ts = _load_tileset(args.tileset)
    if doc["tileset"] != ts.name:
        print(f"error: solution was produced for tile set "
              f"{doc['tileset']!r}, got {ts.name!r}", file=sys.stderr)
        return EXIT_USAGE
    ss = _load_superset(args, ts)
    region = region_from_dict(doc["region"], where=args.solution)
    pose = RigidTransform(doc["pose"]["rotation"],
                          tuple(doc["pose"]["translation"]))
    posed = transform_region(region, pose)
    crop = crop_superset(ss, region, pose)
    tiles = [ts.place(t["prototile"],
                      RigidTransform(t["rotation"], tuple(t["translation"])))
             for t in doc["tiles"]]
    Path(args.out).write_text(render_svg(tiles, crop, posed, ts))
    print(f"svg: {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve
    serve(args.config, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tilekit",
        description="learn-to-tile engine: supersets, training, tiling, "
                    "benchmarks, rendering, service")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed (random if omitted; always printed)")
    parser.add_argument("--config", default=None,
                        help="JSON file with per-subcommand flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("superset", help="build and cache a placement superset")
    p.add_argument("--tileset", required=True)
    p.add_argument("--rings", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--cap", type=int, default=20_000)
    p.add_argument("--no-validate-symmetry", action="store_true")

    p = sub.add_parser("train", help="train the scoring network")
    p.add_argument("--tileset", required=True)
    p.add_argument("--superset", default=None)
    p.add_argument("--rings", type=int, default=None)
    p.add_argument("--cap", type=int, default=20_000)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--train-shapes", type=int, default=500)
    p.add_argument("--val-shapes", type=int, default=100)
    p.add_argument("--layers", type=int, default=6)
    p.add_argument("--channels", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--patience", type=int, default=2)
    p.add_argument("--weight-decay", type=float, default=0.1)
    p.add_argument("--checkpoint-every", type=int, default=0)

    p = sub.add_parser("tile", help="tile a target shape")
    p.add_argument("--tileset", required=True)
    p.add_argument("--superset", default=None)
    p.add_argument("--rings", type=int, default=None)
    p.add_argument("--cap", type=int, default=20_000)
    p.add_argument("--weights", default=None)
    p.add_argument("--shape", required=True)
    p.add_argument("--policy", default="gnn",
                   choices=["gnn", "greedy", "random"])
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--K", dest="k", type=int, default=4)
    p.add_argument("--round-cap", type=int, default=50)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None)
    p.add_argument("--svg", default=None)

    p = sub.add_parser("bench", help="benchmark policies over shapes/sizes")
    p.add_argument("--tileset", required=True)
    p.add_argument("--superset", default=None)
    p.add_argument("--rings", type=int, default=None)
    p.add_argument("--cap", type=int, default=20_000)
    p.add_argument("--weights", default=None)
    p.add_argument("--shapes", required=True, help="directory of shape JSONs")
    p.add_argument("--sizes", default="0.3,0.5",
                   help="comma list of size fractions of the superset")
    p.add_argument("--policies", default="greedy,random")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--K", dest="k", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("render", help="re-render a solution document to SVG")
    p.add_argument("--solution", required=True)
    p.add_argument("--tileset", required=True)
    p.add_argument("--superset", default=None)
    p.add_argument("--rings", type=int, default=None)
    p.add_argument("--cap", type=int, default=20_000)
    p.add_argument("--out", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", dest="config", required=True)
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--host", default="127.0.0.1")
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args, _ = parser.parse_known_args(argv)
    if args.config and args.command != "serve":
        try:
            defaults = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config {args.config}: {exc}",
                  file=sys.stderr)
            return EXIT_USAGE
        section = defaults.get(args.command, {})
        for action in parser._subparsers._group_actions[0].choices[
                args.command]._actions:
            if action.dest in section:
                action.default = section[action.dest]
    args = parser.parse_args(argv)
    try:
        seed = _resolve_seed(args)
        if args.command == "superset":
            return cmd_superset(args)
        if args.command == "render":
            return cmd_render(args)
        if args.command == "serve":
            return cmd_serve(args)
        if args.command == "train":
            return cmd_train(args, seed)
        if args.command == "tile":
            return cmd_tile(args, seed)
        if args.command == "bench":
            return cmd_bench(args, seed)
        raise AssertionError(f"unhandled command {args.command}")
    except (FileNotFoundError, ParseError, VersionError, TileSetError,
            GeometryError, ConfigMismatch, WeightFormatError,
            SystemExit2) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SupersetTooLarge, NoCandidates) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except AssertionError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
