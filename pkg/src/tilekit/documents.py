"""Document formats: tile-set descriptors and solution/graph documents as
human-readable JSON, superset caches as compact versioned binaries.

Every reader validates a version header and reports the location of the
first offending field or byte offset.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .geom import Polygon, Region, RigidTransform, make_polygon
from .graph import AdjacencyGraph
from .solve import Solution
from .tileset import Superset, TileSet, load_tileset, tileset_descriptor

DOC_VERSION = 1
SUPERSET_MAGIC = b"TSUP"
SUPERSET_VERSION = 1


class ParseError(ValueError):
    """Document malformed; message names the offending location."""


class VersionError(ParseError):
    """Document written by an incompatible future format version."""


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _load_json(path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}, "
                         f"column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top level must be an object")
    return data


def _check_version(data: dict, path) -> None:
    version = data.get("version", DOC_VERSION)
    if not isinstance(version, int):
        raise ParseError(f"{path}: 'version' must be an integer")
    if version > DOC_VERSION:
        raise VersionError(f"{path}: document version {version} is newer "
                           f"than supported version {DOC_VERSION}")


def config_digest(payload: dict) -> str:
    """Stable digest of a configuration object."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------- tile sets

def read_tileset(path) -> TileSet:
    return load_tileset(_load_json(path))


def write_tileset(ts: TileSet, path) -> None:
    Path(path).write_text(_dump_json(tileset_descriptor(ts)))


# ------------------------------------------------------------- superset cache

def write_superset(ss: Superset, path) -> None:
    with open(path, "wb") as fh:
        fh.write(SUPERSET_MAGIC)
        fh.write(struct.pack("<I", SUPERSET_VERSION))
        name = ss.tileset.name.encode()
        fh.write(struct.pack("<H", len(name)))
        fh.write(name)
        fh.write(struct.pack("<iII", ss.rings, len(ss.placements),
                             len(ss.pose_table)))
        for p in ss.placements:
            fh.write(struct.pack("<Idddi", p.prototile_index,
                                 p.transform.rotation,
                                 p.transform.translation[0],
                                 p.transform.translation[1],
                                 p.generation))
        for key in ss.pose_table:
            fh.write(struct.pack("<6q", *key))


def read_superset(path, ts: TileSet) -> Superset:
    raw = Path(path).read_bytes()

    def need(offset, count, what):
        if offset + count > len(raw):
            raise ParseError(f"{path}: truncated at offset {offset} "
                             f"while reading {what}")
        return raw[offset:offset + count]

    if need(0, 4, "magic") != SUPERSET_MAGIC:
        raise ParseError(f"{path}: bad magic at offset 0")
    (version,) = struct.unpack("<I", need(4, 4, "version"))
    if version > SUPERSET_VERSION:
        raise VersionError(f"{path}: superset cache version {version} "
                           f"newer than supported {SUPERSET_VERSION}")
    off = 8
    (name_len,) = struct.unpack("<H", need(off, 2, "name length"))
    off += 2
    name = need(off, name_len, "name").decode()
    off += name_len
    if name != ts.name:
        raise ParseError(f"{path}: cache built for tile set {name!r}, "
                         f"got {ts.name!r}")
    rings, n_placements, n_poses = struct.unpack("<iII",
                                                 need(off, 12, "counts"))
    off += 12
    placements = []
    for i in range(n_placements):
        proto, rot, tx, ty, gen = struct.unpack(
            "<Idddi", need(off, 4 + 24 + 4, f"placement {i}"))
        off += 32
        if proto >= ts.num_tile_types:
            raise ParseError(f"{path}: placement {i} references prototile "
                             f"{proto} outside the tile set")
        placements.append(ts.place(proto, RigidTransform(rot, (tx, ty)),
                                   generation=gen))
    pose_table = []
    for i in range(n_poses):
        pose_table.append(tuple(struct.unpack("<6q",
                                              need(off, 48, f"pose {i}"))))
        off += 48
    if off != len(raw):
        raise ParseError(f"{path}: {len(raw) - off} unexpected trailing "
                         f"bytes at offset {off}")
    return Superset(ts, placements, rings, pose_table=pose_table)


# ----------------------------------------------------------------- graphs

def graph_to_dict(g: AdjacencyGraph) -> dict:
    return {
        "version": DOC_VERSION,
        "nodes": [{
            "prototile": p.prototile_index,
            "rotation": p.transform.rotation,
            "translation": list(p.transform.translation),
            "vertices": p.polygon.vertices.tolist(),
            "area_norm": p.area_norm,
        } for p in g.nodes],
        "overlap_edges": g.overlap_edges.tolist(),
        "neighbor_edges": [{
            "i": int(i), "k": int(k), "length": float(length),
            "pose": int(pose),
        } for (i, k), length, pose in zip(g.neighbor_edges,
                                          g.contact_lengths,
                                          g.pose_indices)],
        "node_features": g.node_features.tolist(),
        "edge_features": g.edge_features.tolist(),
        "l_max": g.l_max,
        "num_poses": g.num_poses,
    }


def write_graph(g: AdjacencyGraph, path) -> None:
    Path(path).write_text(_dump_json(graph_to_dict(g)))


def graph_from_dict(data: dict, ts: TileSet, where: str = "graph") -> AdjacencyGraph:
    try:
        nodes = [ts.place(n["prototile"],
                          RigidTransform(n["rotation"],
                                         tuple(n["translation"])))
                 for n in data["nodes"]]
        nbr = data["neighbor_edges"]
        return AdjacencyGraph(
            nodes,
            np.asarray(data["overlap_edges"], dtype=np.int64).reshape(-1, 2),
            np.asarray([[e["i"], e["k"]] for e in nbr],
                       dtype=np.int64).reshape(-1, 2),
            np.asarray([e["length"] for e in nbr], dtype=np.float64),
            np.asarray([e["pose"] for e in nbr], dtype=np.int64),
            np.asarray(data["node_features"],
                       dtype=np.float32).reshape(len(nodes), -1),
            np.asarray(data["edge_features"],
                       dtype=np.float32).reshape(len(nbr), -1),
            float(data["l_max"]),
            ts.num_tile_types,
            int(data["num_poses"]),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ParseError(f"{where}: {exc}") from exc


def read_graph(path, ts: TileSet) -> AdjacencyGraph:
    data = _load_json(path)
    _check_version(data, path)
    return graph_from_dict(data, ts, where=str(path))


# -------------------------------------------------------------- solutions

def region_to_dict(region: Region) -> dict:
    return {"outer": region.outer.vertices.tolist(),
            "holes": [h.vertices.tolist() for h in region.holes]}


def region_from_dict(data: dict, where: str = "region") -> Region:
    try:
        outer = make_polygon(data["outer"])
        holes = [Polygon(np.asarray(h, dtype=float))
                 for h in data.get("holes", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{where}: {exc}") from exc
    return Region(outer, holes)


VOLATILE_METRICS = ("wall_ms",)


def solution_to_dict(sol: Solution, ts: TileSet, region: Region,
                     seed: int, config: dict) -> dict:
    """Solution document; wall-clock metrics are excluded so documents are
    byte-identical across reruns with the same seed."""
    pose = sol.pose if sol.pose is not None else RigidTransform(0.0, (0, 0))
    metrics = {k: v for k, v in sol.metrics.items()
               if k not in VOLATILE_METRICS}
    return {
        "version": DOC_VERSION,
        "tileset": ts.name,
        "seed": seed,
        "config_digest": config_digest(config),
        "pose": {"rotation": pose.rotation,
                 "translation": list(pose.translation)},
        "region": region_to_dict(region),
        "tiles": [{
            "prototile": p.prototile_index,
            "rotation": p.transform.rotation,
            "translation": list(p.transform.translation),
            "vertices": p.polygon.vertices.tolist(),
            "color": ts.prototiles[p.prototile_index].color,
        } for p in sol.placements],
        "metrics": metrics,
        "round_limit_hit": sol.round_limit_hit,
    }


def write_solution(doc: dict, path) -> None:
    Path(path).write_text(_dump_json(doc))


def read_solution(path) -> dict:
    data = _load_json(path)
    _check_version(data, path)
    for field in ("tileset", "tiles", "metrics", "region", "pose", "seed"):
        if field not in data:
            raise ParseError(f"{path}: missing required field '{field}'")
    for i, tile in enumerate(data["tiles"]):
        for field in ("prototile", "rotation", "translation", "vertices"):
            if field not in tile:
                raise ParseError(f"{path}: tiles[{i}] missing '{field}'")
    return data
