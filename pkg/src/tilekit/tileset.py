"""Tile sets, candidate placements, and the placement superset.

A tile set supplies prototile polygons plus its lattice symmetry (minimum
rotation theta and translations dx, dy under which the candidate pattern
maps onto itself).  Candidate placements are enumerated by aligning edge
pairs flush or at slides quantized to the tile set's shortest edge length,
then grown breadth-first from a seed into a deduplicated superset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import shapely
import shapely.prepared

from .geom import (
    IDENTITY,
    Polygon,
    RigidTransform,
    TWO_PI,
    Tolerances,
    canonical_frame,
    canonical_key,
    interiors_overlap,
    make_polygon,
    overlap_area,
    shape_signature,
    shared_boundary_length,
    signed_area,
)
from .spatial import SpatialHash

DEFAULT_SUPERSET_CAP = 20_000

_PALETTE = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3",
            "#937860", "#da8bc3", "#8c8c8c", "#ccb974", "#64b5cd"]


class TileSetError(ValueError):
    """Malformed or unsupported tile-set descriptor."""


class SupersetTooLarge(RuntimeError):
    """Superset growth exceeded the configured placement cap."""


class SymmetryClosureError(RuntimeError):
    """Candidate pattern is not closed under the declared symmetry; the
    tile set does not induce a periodic placement grid."""


class NotNeighbors(ValueError):
    """Queried pair of placements is not in edge contact."""


class PoseTableIncomplete(KeyError):
    """A contacting pair has no entry in the superset's pose table."""


@dataclass(frozen=True)
class Symmetry:
    theta: float
    dx: float
    dy: float


class Prototile:
    __slots__ = ("polygon", "color", "area", "perimeter")

    def __init__(self, polygon: Polygon, color: str):
        self.polygon = polygon
        self.color = color
        self.area = abs(signed_area(polygon.vertices))
        self.perimeter = polygon.perimeter()


class Placement:
    """One posed prototile instance: the node payload of the tiling graph."""

    __slots__ = ("prototile_index", "transform", "polygon", "area_norm",
                 "key", "generation")

    def __init__(self, prototile_index: int, transform: RigidTransform,
                 polygon: Polygon, area_norm: float, key: tuple,
                 generation: int = 0):
        self.prototile_index = prototile_index
        self.transform = transform
        self.polygon = polygon
        self.area_norm = area_norm
        self.key = key
        self.generation = generation

    def __hash__(self):
        return hash(self.key)

    def __eq__(self, other):
        return isinstance(other, Placement) and self.key == other.key

    def __repr__(self):
        t = self.transform
        return (f"Placement(proto={self.prototile_index}, "
                f"rot={t.rotation:.4f}, at=({t.translation[0]:.3f},"
                f"{t.translation[1]:.3f}))")


class TileSet:
    """Validated tile set with derived tolerances and normalization data."""

    def __init__(self, name: str, prototiles: list[Prototile],
                 symmetry: Symmetry, default_rings: int = 6):
        if not prototiles:
            raise TileSetError("tile set needs at least one prototile")
        if not (0.0 < symmetry.theta <= TWO_PI):
            raise TileSetError("symmetry theta must be in (0, 2*pi]")
        if symmetry.dx <= 0 or symmetry.dy <= 0:
            raise TileSetError("symmetry translations must be positive")
        self.name = name
        self.prototiles = prototiles
        self.symmetry = symmetry
        self.default_rings = int(default_rings)
        self.u = min(_shortest_edge(p.polygon) for p in prototiles)
        if self.u <= 0:
            raise TileSetError("prototile with zero-length edge")
        self.tol = Tolerances.for_unit(self.u)
        self.max_area = max(p.area for p in prototiles)
        self.max_perimeter = max(p.perimeter for p in prototiles)
        self.max_diameter = max(_diameter(p.polygon) for p in prototiles)
        sigs = [shape_signature(p.polygon, self.tol.snap) for p in prototiles]
        if len(set(sigs)) != len(sigs):
            raise TileSetError("duplicate prototile (congruent up to rotation "
                               "and translation); mirror images are distinct")

    @property
    def num_tile_types(self) -> int:
        return len(self.prototiles)

    def place(self, prototile_index: int, transform: RigidTransform,
              generation: int = 0) -> Placement:
        proto = self.prototiles[prototile_index]
        realized = Polygon(transform.apply(proto.polygon.vertices))
        return Placement(prototile_index, transform, realized,
                         proto.area / self.max_area,
                         canonical_key(realized, self.tol.snap),
                         generation)


def _shortest_edge(p: Polygon) -> float:
    d = np.roll(p.vertices, -1, axis=0) - p.vertices
    return float(np.hypot(d[:, 0], d[:, 1]).min())


def _diameter(p: Polygon) -> float:
    x0, y0, x1, y1 = p.bounds()
    return math.hypot(x1 - x0, y1 - y0)


def load_tileset(descriptor: dict) -> TileSet:
    """Build a TileSet from a descriptor document (parsed JSON).

    Expected shape::

        {"name": str,
         "prototiles": [{"vertices": [[x, y], ...], "color": "#rrggbb"}, ...],
         "symmetry": {"theta": float, "dx": float, "dy": float},
         "default_rings": int}
    """
    if not isinstance(descriptor, dict):
        raise TileSetError("descriptor must be an object")
    name = descriptor.get("name")
    if not isinstance(name, str) or not name:
        raise TileSetError("descriptor.name must be a non-empty string")
    raw_tiles = descriptor.get("prototiles")
    if not isinstance(raw_tiles, list) or not raw_tiles:
        raise TileSetError("descriptor.prototiles must be a non-empty list")
    prototiles = []
    for i, entry in enumerate(raw_tiles):
        where = f"descriptor.prototiles[{i}]"
        if not isinstance(entry, dict) or "vertices" not in entry:
            raise TileSetError(f"{where} must be an object with 'vertices'")
        try:
            poly = make_polygon(np.asarray(entry["vertices"], dtype=float))
        except (ValueError, TypeError) as exc:
            raise TileSetError(f"{where}.vertices invalid: {exc}") from exc
        color = entry.get("color", _PALETTE[i % len(_PALETTE)])
        prototiles.append(Prototile(poly, color))
    raw_sym = descriptor.get("symmetry")
    if not isinstance(raw_sym, dict):
        raise TileSetError("descriptor.symmetry must be an object")
    try:
        sym = Symmetry(float(raw_sym["theta"]), float(raw_sym["dx"]),
                       float(raw_sym["dy"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise TileSetError(f"descriptor.symmetry invalid: {exc}") from exc
    return TileSet(name, prototiles, sym,
                   int(descriptor.get("default_rings", 6)))


def tileset_descriptor(ts: TileSet) -> dict:
    return {
        "name": ts.name,
        "prototiles": [{"vertices": p.polygon.vertices.tolist(),
                        "color": p.color} for p in ts.prototiles],
        "symmetry": {"theta": ts.symmetry.theta, "dx": ts.symmetry.dx,
                     "dy": ts.symmetry.dy},
        "default_rings": ts.default_rings,
    }


def _is_multiple(length: float, u: float, eps: float) -> bool:
    ratio = length / u
    return abs(ratio - round(ratio)) * u < eps


def _contact_offsets(la: float, lb: float, u: float, min_contact: float,
                     eps: float) -> list[float]:
    """Positions of the neighbor edge's start along the seed edge axis.

    Always includes the two flush alignments; when the shorter edge length
    is a multiple of u, adds every slide at multiples of u (measured from
    either endpoint of the longer edge) keeping contact >= min_contact.
    """
    offsets = {0.0, la - lb}
    if _is_multiple(min(la, lb), u, eps):
        lo = -lb + min_contact - eps
        hi = la - min_contact + eps
        m = math.ceil(lo / u)
        while m * u <= hi:
            for o in (m * u, (la - lb) - m * u):
                if min(la, o + lb) - max(0.0, o) >= min_contact - eps:
                    offsets.add(o)
            m += 1
    out = []
    seen = set()
    scale = max(eps, 1e-12)
    for o in sorted(offsets):
        k = round(o / scale)
        if k not in seen:
            seen.add(k)
            out.append(o)
    return out


def enumerate_neighbors(seed: Placement, ts: TileSet) -> list[Placement]:
    """All placements contacting the seed along a shared edge segment.

    Covers every prototile, every edge pair, both flush alignments, and
    slides quantized to the tile set's shortest edge; results are
    overlap-free against the seed and deduplicated by canonical key.
    """
    tol = ts.tol
    found: dict[tuple, Placement] = {}
    for a1, a2 in seed.polygon.edges():
        da = a2 - a1
        la = math.hypot(da[0], da[1])
        ua = da / la
        ang_a = math.atan2(da[1], da[0])
        for q_idx, proto in enumerate(ts.prototiles):
            for b1, b2 in proto.polygon.edges():
                db = b2 - b1
                lb = math.hypot(db[0], db[1])
                ang_b = math.atan2(db[1], db[0])
                # contacting edges of CCW polygons run antiparallel
                rot = (ang_a + math.pi - ang_b) % TWO_PI
                c, s = math.cos(rot), math.sin(rot)
                b1r = np.array([c * b1[0] - s * b1[1], s * b1[0] + c * b1[1]])
                for o in _contact_offsets(la, lb, ts.u, tol.min_contact,
                                          tol.eps_geo):
                    target = a1 + (o + lb) * ua
                    t = RigidTransform(rot, (target[0] - b1r[0],
                                             target[1] - b1r[1]))
                    cand = ts.place(q_idx, t, seed.generation + 1)
                    if cand.key in found or cand.key == seed.key:
                        continue
                    if interiors_overlap(seed.polygon, cand.polygon, tol):
                        continue
                    contact = shared_boundary_length(seed.polygon, cand.polygon, tol)
                    if contact < tol.min_contact - tol.eps_geo:
                        continue
                    found[cand.key] = cand
    return list(found.values())


def relative_pose_key(a: Placement, b: Placement, ts: TileSet,
                      contact_length: float) -> tuple:
    """Snapped key for the geometric relation of the ordered pair (a, b).

    Computed in a's canonical geometric frame, so it is independent of the
    transform representatives placements happen to carry and invariant to
    joint translation of the pair.
    """
    tol = ts.tol
    oa, ang_a = canonical_frame(a.polygon, tol.snap)
    ob, ang_b = canonical_frame(b.polygon, tol.snap)
    rel_ang = (ang_b - ang_a) % TWO_PI
    c, s = math.cos(-ang_a), math.sin(-ang_a)
    d = ob - oa
    rel = (c * d[0] - s * d[1], s * d[0] + c * d[1])
    angle_units = max(1, round(TWO_PI / tol.angle_snap))
    return (a.prototile_index, b.prototile_index,
            round(rel_ang / tol.angle_snap) % angle_units,
            round(rel[0] / tol.snap), round(rel[1] / tol.snap),
            round(contact_length / tol.snap))


class Superset:
    """Deduplicated candidate placements grown around a seed, plus the
    table of distinct relative poses between contacting pairs."""

    def __init__(self, tileset: TileSet, placements: list[Placement],
                 rings: int, pose_table: list[tuple] | None = None):
        self.tileset = tileset
        self.placements = placements
        self.rings = rings
        self.key_index = {p.key: i for i, p in enumerate(placements)}
        if pose_table is None:
            pose_table = self._collect_pose_table()
        self.pose_table = pose_table
        self.pose_lookup = {k: i for i, k in enumerate(pose_table)}

    def __len__(self):
        return len(self.placements)

    @property
    def pose_count(self) -> int:
        return len(self.pose_table)

    def bounds(self) -> tuple[float, float, float, float]:
        bs = np.array([p.polygon.bounds() for p in self.placements])
        return (bs[:, 0].min(), bs[:, 1].min(), bs[:, 2].max(), bs[:, 3].max())

    def spatial_index(self) -> SpatialHash:
        h = SpatialHash(max(self.tileset.max_diameter, self.tileset.u),
                        eps=self.tileset.tol.eps_geo)
        for i, p in enumerate(self.placements):
            h.insert(i, p.polygon.bounds())
        return h

    def _collect_pose_table(self) -> list[tuple]:
        ts = self.tileset
        tol = ts.tol
        keys = set()
        index = self.spatial_index()
        for i, j in index.candidate_pairs():
            a, b = self.placements[i], self.placements[j]
            if interiors_overlap(a.polygon, b.polygon, tol):
                continue
            contact = shared_boundary_length(a.polygon, b.polygon, tol)
            if contact < tol.min_contact - tol.eps_geo:
                continue
            keys.add(relative_pose_key(a, b, ts, contact))
            keys.add(relative_pose_key(b, a, ts, contact))
        return sorted(keys)

    def pose_index(self, a: Placement, b: Placement) -> int:
        """Index into the pose table for the ordered contacting pair (a, b)."""
        ts = self.tileset
        tol = ts.tol
        if interiors_overlap(a.polygon, b.polygon, tol):
            raise NotNeighbors("placements overlap")
        contact = shared_boundary_length(a.polygon, b.polygon, tol)
        if contact < tol.min_contact - tol.eps_geo:
            raise NotNeighbors("placements share no edge segment")
        key = relative_pose_key(a, b, ts, contact)
        try:
            return self.pose_lookup[key]
        except KeyError:
            raise PoseTableIncomplete(
                f"contacting pair has no pose entry: {key}") from None


def build_superset(ts: TileSet, rings: int,
                   cap: int = DEFAULT_SUPERSET_CAP,
                   validate_symmetry: bool = True) -> Superset:
    """Grow the candidate superset breadth-first for `rings` generations
    from prototile 0 at the identity transform."""
    if rings < 0:
        raise ValueError("rings must be >= 0")
    seed = ts.place(0, IDENTITY, generation=0)
    placements: dict[tuple, Placement] = {seed.key: seed}
    frontier = [seed]
    for _ in range(rings):
        nxt = []
        for p in frontier:
            for nb in enumerate_neighbors(p, ts):
                if nb.key not in placements:
                    placements[nb.key] = nb
                    nxt.append(nb)
                    if len(placements) > cap:
                        raise SupersetTooLarge(
                            f"superset exceeded cap of {cap} placements")
        frontier = nxt
    ss = Superset(ts, list(placements.values()), rings)
    if validate_symmetry:
        check_symmetry_closure(ss)
    return ss


def check_symmetry_closure(ss: Superset):
    """Verify the superset maps onto itself under the declared symmetry.

    A symmetry image of a placement may legitimately be missing only when
    it lies beyond the breadth-first reach.  Two kinds of evidence convict
    an absent image: it shares an edge segment with an interior placement
    (the BFS would have enumerated it), or its polygon lies entirely inside
    the region covered by interior placements (the pattern, were it closed,
    would contain it).  Either case proves the candidate pattern is not a
    periodic grid under the declared symmetry.
    """
    ts = ss.tileset
    tol = ts.tol
    sym = ts.symmetry
    seed = ss.placements[0]
    centroid = seed.polygon.shapely.centroid
    cx, cy = centroid.x, centroid.y
    c, s = math.cos(sym.theta), math.sin(sym.theta)

    def rotate(verts):
        shifted = verts - (cx, cy)
        return shifted @ np.array([[c, s], [-s, c]]) + (cx, cy)

    maps = [lambda v: v + (sym.dx, 0.0),
            lambda v: v + (0.0, sym.dy),
            rotate]
    interior = [p for p in ss.placements if p.generation < ss.rings]
    if not interior:
        return True
    index = SpatialHash(max(ts.max_diameter, ts.u), eps=tol.eps_geo)
    for i, p in enumerate(interior):
        index.insert(i, p.polygon.bounds())
    covered = shapely.prepared.prep(
        shapely.unary_union([p.polygon.shapely for p in interior])
        .buffer(tol.eps_geo))
    for p in ss.placements:
        for mapping in maps:
            image = Polygon(mapping(p.polygon.vertices))
            if canonical_key(image, tol.snap) in ss.key_index:
                continue
            convicted = covered.covers(image.shapely)
            if not convicted:
                for j in index.query(image.bounds()):
                    q = interior[j]
                    if interiors_overlap(image, q.polygon, tol):
                        continue
                    if shared_boundary_length(image, q.polygon, tol) \
                            >= tol.min_contact - tol.eps_geo:
                        convicted = True
                        break
            if convicted:
                raise SymmetryClosureError(
                    f"symmetry image of {p!r} is absent from the superset; "
                    "candidate pattern is not a periodic grid under the "
                    "declared symmetry")
    return True


def sweep_superset(ts: TileSet, bounds: tuple[float, float, float, float],
                   angles: tuple[float, ...] = (0.0, math.pi / 2, math.pi,
                                                1.5 * math.pi)) -> dict:
    """Grid-sweep constructor: every prototile at every unique orientation
    translated over the u-grid, keeping placements inside `bounds`.

    Suits tile sets whose placements live on a square lattice (e.g.
    trominoes); returns a canonical-key -> Placement mapping.
    """
    u = ts.u
    x0, y0, x1, y1 = bounds
    eps = ts.tol.eps_geo
    out: dict[tuple, Placement] = {}
    for idx, proto in enumerate(ts.prototiles):
        seen_orientations = set()
        for ang in angles:
            base = RigidTransform(ang, (0.0, 0.0))
            rotated = Polygon(base.apply(proto.polygon.vertices))
            sig = canonical_key(Polygon(rotated.vertices - rotated.vertices.min(axis=0)),
                                ts.tol.snap)
            if sig in seen_orientations:
                continue
            seen_orientations.add(sig)
            bx0, by0, bx1, by1 = rotated.bounds()
            gx_lo = math.ceil((x0 - bx0 - eps) / u)
            gx_hi = math.floor((x1 - bx1 + eps) / u)
            gy_lo = math.ceil((y0 - by0 - eps) / u)
            gy_hi = math.floor((y1 - by1 + eps) / u)
            for gx in range(gx_lo, gx_hi + 1):
                for gy in range(gy_lo, gy_hi + 1):
                    p = ts.place(idx, RigidTransform(ang, (gx * u, gy * u)))
                    out[p.key] = p
    return out
