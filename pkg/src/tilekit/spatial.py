"""Uniform spatial hash over axis-aligned bounding boxes.

Broad-phase pruning for pairwise geometry tests; exact predicates run on
the surviving candidate pairs only.
"""

from __future__ import annotations

import math


class SpatialHash:
    """Grid of square cells mapping to the item indices whose bounding box
    touches them.  Cell size should be at least the largest item diameter
    so every interacting pair shares a cell."""

    def __init__(self, cell_size: float, eps: float = 0.0):
        if cell_size <= 0:
            raise ValueError("cell_size must be positive")
        self.cell_size = cell_size
        self.eps = eps  # boxes are inflated by eps so touching pairs survive
        self.cells: dict[tuple[int, int], list[int]] = {}
        self.bounds: list[tuple[float, float, float, float]] = []

    def _cell_range(self, b):
        cs = self.cell_size
        return (math.floor(b[0] / cs), math.floor(b[1] / cs),
                math.floor(b[2] / cs), math.floor(b[3] / cs))

    def insert(self, index: int, bounds: tuple[float, float, float, float]):
        e = self.eps
        bounds = (bounds[0] - e, bounds[1] - e, bounds[2] + e, bounds[3] + e)
        while len(self.bounds) <= index:
            self.bounds.append(None)
        self.bounds[index] = bounds
        x0, y0, x1, y1 = self._cell_range(bounds)
        for cx in range(x0, x1 + 1):
            for cy in range(y0, y1 + 1):
                self.cells.setdefault((cx, cy), []).append(index)

    def query(self, bounds) -> list[int]:
        """Indices whose bounding box overlaps `bounds` (deduplicated,
        ascending)."""
        x0, y0, x1, y1 = self._cell_range(bounds)
        seen = set()
        for cx in range(x0, x1 + 1):
            for cy in range(y0, y1 + 1):
                for idx in self.cells.get((cx, cy), ()):
                    if idx not in seen and _boxes_overlap(self.bounds[idx], bounds):
                        seen.add(idx)
        return sorted(seen)

    def candidate_pairs(self):
        """All index pairs (i < j) sharing a cell with overlapping boxes,
        in deterministic ascending order."""
        pairs = set()
        for members in self.cells.values():
            for a in range(len(members)):
                for b in range(a + 1, len(members)):
                    i, j = members[a], members[b]
                    if i > j:
                        i, j = j, i
                    if (i, j) not in pairs and _boxes_overlap(self.bounds[i], self.bounds[j]):
                        pairs.add((i, j))
        return sorted(pairs)


def _boxes_overlap(a, b) -> bool:
    return not (a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1])


def build_hash(bounds_list, cell_size: float) -> SpatialHash:
    h = SpatialHash(cell_size)
    for i, b in enumerate(bounds_list):
        h.insert(i, b)
    return h
