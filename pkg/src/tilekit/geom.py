"""Tolerance-based 2D polygon geometry: areas, rigid motions, clipping,
shared-boundary measurement, containment, and snap-grid canonical keys.

All functions are pure and thread-safe.  Boolean operations (intersection,
union, containment) are delegated to shapely; boundary-contact measurement is
implemented directly so that nearly-collinear contacts survive floating-point
noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import shapely
import shapely.geometry as sgeom

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Base class for geometry failures."""


class DegeneratePolygon(GeometryError):
    """Polygon has (near) zero area or too few usable vertices."""


@dataclass(frozen=True)
class Tolerances:
    """Length/area thresholds scaled to a tile set's shortest edge u."""

    eps_geo: float     # genuine-contact length threshold
    eps_area: float    # genuine-overlap area threshold
    snap: float        # dedup snap grid pitch
    angle_snap: float  # relative-rotation snap, radians
    min_contact: float # shortest accepted shared segment

    @classmethod
    def for_unit(cls, u: float) -> "Tolerances":
        return cls(
            eps_geo=1e-6 * u,
            eps_area=1e-8 * u * u,
            snap=1e-4 * u,
            angle_snap=1e-4,
            min_contact=0.5 * u,
        )


#: Default tolerances for unit-scale geometry (u = 1).
UNIT_TOL = Tolerances.for_unit(1.0)


@dataclass(frozen=True)
class RigidTransform:
    """Rotation (radians, normalized to [0, 2pi)) followed by translation."""

    rotation: float
    translation: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "rotation", self.rotation % TWO_PI)
        object.__setattr__(self, "translation", (float(self.translation[0]),
                                                 float(self.translation[1])))

    def apply(self, points: np.ndarray) -> np.ndarray:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        rot = np.array([[c, -s], [s, c]])
        return points @ rot.T + np.asarray(self.translation)


IDENTITY = RigidTransform(0.0, (0.0, 0.0))


def signed_area(vertices: np.ndarray) -> float:
    """Shoelace signed area; positive for counterclockwise rings."""
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


class Polygon:
    """Simple polygon stored as an (n, 2) vertex array.

    Orientation is not forced at construction; use :func:`make_polygon` to
    validate and canonicalize user input.
    """

    __slots__ = ("vertices", "_shapely", "_convex")

    def __init__(self, vertices):
        self.vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 2)
        self._shapely = None
        self._convex = None

    @property
    def shapely(self) -> sgeom.Polygon:
        if self._shapely is None:
            self._shapely = sgeom.Polygon(self.vertices)
        return self._shapely

    def bounds(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return (lo[0], lo[1], hi[0], hi[1])

    def perimeter(self) -> float:
        d = np.diff(np.vstack([self.vertices, self.vertices[:1]]), axis=0)
        return float(np.hypot(d[:, 0], d[:, 1]).sum())

    def edges(self):
        """Yield (start, end) vertex pairs for every boundary edge."""
        n = len(self.vertices)
        for i in range(n):
            yield self.vertices[i], self.vertices[(i + 1) % n]

    def __len__(self):
        return len(self.vertices)

    def __repr__(self):
        return f"Polygon({len(self.vertices)} vertices)"


def make_polygon(vertices, tol: Tolerances = UNIT_TOL) -> Polygon:
    """Validate raw vertices into a CCW simple polygon.

    Raises DegeneratePolygon for near-zero area and GeometryError for
    self-intersection, < 3 vertices, or consecutive vertices closer than
    eps_geo.
    """
    pts = np.asarray(vertices, dtype=np.float64).reshape(-1, 2)
    if len(pts) >= 2 and np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    if len(pts) < 3:
        raise GeometryError(f"polygon needs >= 3 vertices, got {len(pts)}")
    gaps = np.hypot(*(np.roll(pts, -1, axis=0) - pts).T)
    if np.any(gaps < tol.eps_geo):
        raise GeometryError("consecutive vertices closer than eps_geo")
    area = signed_area(pts)
    if abs(area) < tol.eps_area:
        raise DegeneratePolygon(f"polygon area {area:g} below eps_area")
    if area < 0:
        pts = pts[::-1].copy()
    poly = Polygon(pts)
    if not poly.shapely.is_valid or not poly.shapely.is_simple:
        raise GeometryError("polygon is self-intersecting")
    return poly


class Region:
    """Outer boundary plus optional holes (holes strictly inside, disjoint)."""

    __slots__ = ("outer", "holes", "_shapely")

    def __init__(self, outer: Polygon, holes: list[Polygon] | None = None):
        self.outer = outer
        self.holes = list(holes or [])
        self._shapely = None

    @property
    def shapely(self) -> sgeom.Polygon:
        if self._shapely is None:
            self._shapely = sgeom.Polygon(
                self.outer.vertices, [h.vertices for h in self.holes])
            if not self._shapely.is_valid:
                raise GeometryError("region outer/holes do not nest properly")
        return self._shapely

    def bounds(self) -> tuple[float, float, float, float]:
        return self.outer.bounds()

    def boundary_edges(self):
        yield from self.outer.edges()
        for h in self.holes:
            yield from h.edges()


def polygon_area(p: Polygon, tol: Tolerances = UNIT_TOL) -> float:
    """Positive shoelace area; raises DegeneratePolygon below eps_area."""
    area = abs(signed_area(p.vertices))
    if area < tol.eps_area:
        raise DegeneratePolygon(f"area {area:g} below eps_area")
    return area


def apply_transform(p: Polygon, t: RigidTransform) -> Polygon:
    return Polygon(t.apply(p.vertices))


def transform_region(r: Region, t: RigidTransform) -> Region:
    return Region(apply_transform(r.outer, t),
                  [apply_transform(h, t) for h in r.holes])


def overlap_area(a: Polygon, b: Polygon) -> float:
    """Area of interior intersection; 0 for edge/point contact."""
    abox, bbox = a.bounds(), b.bounds()
    if (abox[2] <= bbox[0] or bbox[2] <= abox[0]
            or abox[3] <= bbox[1] or bbox[3] <= abox[1]):
        return 0.0
    inter = a.shapely.intersection(b.shapely)
    return float(inter.area)


def is_convex(p: Polygon) -> bool:
    """CCW polygon convexity (collinear vertices allowed); cached."""
    if p._convex is None:
        v = p.vertices
        d = np.roll(v, -1, axis=0) - v
        cross = d[:, 0] * np.roll(d[:, 1], -1) - d[:, 1] * np.roll(d[:, 0], -1)
        p._convex = bool(np.all(cross >= -1e-12))
    return p._convex


def _sat_penetration(a: Polygon, b: Polygon) -> float:
    """Minimum projected interval overlap over both polygons' edge-normal
    axes (valid for convex inputs): > 0 means interiors intersect with that
    penetration depth, <= 0 means separated or touching."""
    depth = math.inf
    for poly in (a, b):
        v = poly.vertices
        edges = np.roll(v, -1, axis=0) - v
        normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1)
        lengths = np.hypot(normals[:, 0], normals[:, 1])
        normals = normals / lengths[:, None]
        pa = a.vertices @ normals.T
        pb = b.vertices @ normals.T
        gap = np.minimum(pa.max(axis=0), pb.max(axis=0)) - \
            np.maximum(pa.min(axis=0), pb.min(axis=0))
        depth = min(depth, float(gap.min()))
    return depth


def interiors_overlap(a: Polygon, b: Polygon, tol: Tolerances) -> bool:
    """Fast boolean form of overlap_area(a, b) >= eps_area.

    Bounding-box area prefilter first; convex pairs use a separating-axis
    test (penetration beyond eps_geo); concave pairs fall back to exact
    clipping.
    """
    abox, bbox = a.bounds(), b.bounds()
    w = min(abox[2], bbox[2]) - max(abox[0], bbox[0])
    h = min(abox[3], bbox[3]) - max(abox[1], bbox[1])
    if w <= 0 or h <= 0 or w * h < tol.eps_area:
        return False
    if is_convex(a) and is_convex(b):
        return _sat_penetration(a, b) > tol.eps_geo
    return overlap_area(a, b) >= tol.eps_area


def _edge_overlap_length(p1, p2, q1, q2, eps: float) -> float:
    """Length of the collinear overlap of segments (p1,p2) and (q1,q2).

    Returns 0 unless both q endpoints lie within eps of the line through
    (p1,p2) and the projected intervals overlap by more than eps.
    """
    d = p2 - p1
    length = math.hypot(d[0], d[1])
    if length < eps:
        return 0.0
    u = d / length
    off1 = (q1 - p1)[0] * u[1] - (q1 - p1)[1] * u[0]
    off2 = (q2 - p1)[0] * u[1] - (q2 - p1)[1] * u[0]
    if abs(off1) > eps or abs(off2) > eps:
        return 0.0
    t1 = float((q1 - p1) @ u)
    t2 = float((q2 - p1) @ u)
    lo, hi = min(t1, t2), max(t1, t2)
    overlap = min(hi, length) - max(lo, 0.0)
    return overlap if overlap > eps else 0.0


def shared_boundary_length(a: Polygon, b: Polygon,
                           tol: Tolerances = UNIT_TOL) -> float:
    """Total collinear boundary contact between two interior-disjoint
    polygons.  Point contacts contribute 0."""
    abox, bbox = a.bounds(), b.bounds()
    e = tol.eps_geo
    if (abox[2] + e < bbox[0] or bbox[2] + e < abox[0]
            or abox[3] + e < bbox[1] or bbox[3] + e < abox[1]):
        return 0.0
    total = 0.0
    for p1, p2 in a.edges():
        for q1, q2 in b.edges():
            total += _edge_overlap_length(p1, p2, q1, q2, e)
    return total


def boundary_contact_length(p: Polygon, r: Region,
                            tol: Tolerances = UNIT_TOL) -> float:
    """Collinear contact between a polygon and a region's boundary."""
    total = 0.0
    for p1, p2 in p.edges():
        for q1, q2 in r.boundary_edges():
            total += _edge_overlap_length(p1, p2, q1, q2, tol.eps_geo)
    return total


def region_contains(r: Region, p: Polygon, tol: float) -> bool:
    """True if p lies inside the region, allowing boundary contact within
    tol (applies to the outer boundary and hole boundaries alike)."""
    return r.shapely.buffer(tol).covers(p.shapely)


def canonical_key(p: Polygon, snap: float) -> tuple:
    """Hashable key invariant to vertex-list rotation; coordinates snapped
    to a grid of pitch `snap`, then the lexicographically smallest rotation
    of the vertex tuple is taken."""
    snapped = np.rint(p.vertices / snap).astype(np.int64)
    ring = [tuple(v) for v in snapped]
    n = len(ring)
    best = min(range(n), key=lambda i: ring[i:] + ring[:i])
    return tuple(ring[best:] + ring[:best])


def canonical_start_index(p: Polygon, snap: float) -> int:
    """Index of the vertex chosen as the canonical list start (same
    selection rule as canonical_key)."""
    snapped = np.rint(p.vertices / snap).astype(np.int64)
    ring = [tuple(v) for v in snapped]
    n = len(ring)
    return min(range(n), key=lambda i: ring[i:] + ring[:i])


def canonical_frame(p: Polygon, snap: float) -> tuple[np.ndarray, float]:
    """A geometry-determined local frame: origin at the canonical start
    vertex, x-axis along the edge leaving it.  Stable under vertex-list
    rotation and sub-snap perturbation, so relative poses computed in this
    frame are reproducible across construction orders."""
    i = canonical_start_index(p, snap)
    origin = p.vertices[i]
    nxt = p.vertices[(i + 1) % len(p.vertices)]
    angle = math.atan2(nxt[1] - origin[1], nxt[0] - origin[0])
    return origin, angle


def shape_signature(p: Polygon, snap: float) -> tuple:
    """Congruence key up to rotation + translation (mirror images map to
    different signatures, so reflected prototiles stay distinct).

    Minimizes over every intrinsic frame (each vertex with its outgoing
    edge as the x-axis), so the result is independent of the polygon's
    world pose.
    """
    verts = p.vertices
    n = len(verts)
    best = None
    for i in range(n):
        origin = verts[i]
        nxt = verts[(i + 1) % n]
        angle = math.atan2(nxt[1] - origin[1], nxt[0] - origin[0])
        c, s = math.cos(-angle), math.sin(-angle)
        rot = np.array([[c, -s], [s, c]])
        local = (verts - origin) @ rot.T
        key = canonical_key(Polygon(local), snap)
        if best is None or key < best:
            best = key
    return best


def point_in_polygon(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Vectorized even-odd crossing test; boundary points are unreliable
    (used only by sampling oracles, never by production predicates)."""
    x, y = points[:, 0], points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < xint)
    return inside
