"""SVG rendering of tiling solutions.

Layer order follows the established presentation convention: the input
region in gray first, the union of all candidate placements in blue on
top of it, then the solution tiles colored by prototile.  Output bytes are
deterministic for identical inputs (fixed float formatting).
"""

from __future__ import annotations

import shapely

from .geom import Region
from .tileset import TileSet

REGION_FILL = "#d4d4d4"
CANDIDATE_FILL = "#a6c8e4"
STROKE = "#1a1a1a"


def _fmt(v: float) -> str:
    return f"{v:.6f}".rstrip("0").rstrip(".")


class _Frame:
    """Model-to-SVG coordinate mapping (y flipped, margin added)."""

    def __init__(self, bounds, width_px):
        x0, y0, x1, y1 = bounds
        margin = 0.04 * max(x1 - x0, y1 - y0, 1e-9)
        self.x0, self.y0 = x0 - margin, y0 - margin
        self.x1, self.y1 = x1 + margin, y1 + margin
        self.scale = width_px / (self.x1 - self.x0)
        self.width = width_px
        self.height = (self.y1 - self.y0) * self.scale

    def point(self, x, y):
        return ((x - self.x0) * self.scale,
                (self.y1 - y) * self.scale)


def _ring_path(frame, coords) -> str:
    pts = [frame.point(x, y) for x, y in coords]
    body = " L ".join(f"{_fmt(px)} {_fmt(py)}" for px, py in pts)
    return f"M {body} Z"


def _shapely_paths(frame, geometry) -> str:
    parts = []
    for geom in getattr(geometry, "geoms", [geometry]):
        if geom.is_empty or geom.geom_type != "Polygon":
            continue
        parts.append(_ring_path(frame, list(geom.exterior.coords)[:-1]))
        for interior in geom.interiors:
            parts.append(_ring_path(frame, list(interior.coords)[:-1]))
    return " ".join(parts)


def render_svg(tiles, crop_placements, region: Region, ts: TileSet,
               width_px: int = 640) -> str:
    """Render a solution document's tiles over the region and
    candidate-union underlays.

    `tiles` are placements (or any objects with .polygon and
    .prototile_index); an empty list renders underlays only.
    """
    shapes = [region.shapely]
    cand_union = None
    if crop_placements:
        cand_union = shapely.unary_union(
            [p.polygon.shapely for p in crop_placements])
        shapes.append(cand_union)
    bounds = shapely.unary_union(shapes).bounds
    frame = _Frame(bounds, width_px)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{_fmt(frame.width)}" height="{_fmt(frame.height)}" '
        f'viewBox="0 0 {_fmt(frame.width)} {_fmt(frame.height)}">',
        f'<path d="{_shapely_paths(frame, region.shapely)}" '
        f'fill="{REGION_FILL}" fill-rule="evenodd" stroke="none"/>',
    ]
    if cand_union is not None:
        parts.append(f'<path d="{_shapely_paths(frame, cand_union)}" '
                     f'fill="{CANDIDATE_FILL}" fill-rule="evenodd" '
                     f'stroke="none"/>')
    stroke_w = _fmt(max(frame.scale * 0.02, 0.5))
    for tile in tiles:
        color = ts.prototiles[tile.prototile_index].color
        path = _ring_path(frame, tile.polygon.vertices)
        parts.append(f'<path d="{path}" fill="{color}" stroke="{STROKE}" '
                     f'stroke-width="{stroke_w}" stroke-linejoin="round"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
