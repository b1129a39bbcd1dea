"""Crop placements against a target region and build the tiling graph.

Nodes are candidate placements; overlap edges join placements whose
interiors intersect, neighbor edges join placements sharing an edge
segment.  Node features are [normalized area | one-hot tile type]; each
neighbor-edge feature is [normalized contact length | one-hot relative
pose].
"""

from __future__ import annotations

import numpy as np
import shapely
import shapely.prepared

from .geom import IDENTITY, Region, RigidTransform, interiors_overlap, \
    shared_boundary_length, transform_region
from .spatial import SpatialHash
from .tileset import Placement, Superset, relative_pose_key, PoseTableIncomplete


class EmptyGraph(ValueError):
    """Operation requires a non-empty graph."""


class AdjacencyGraph:
    """Immutable tiling graph over a fixed list of candidate placements.

    Nodes are held in canonical (geometry-sorted) order so that graphs
    built from any permutation of the same placements are identical,
    making downstream network evaluation reproducible bit-for-bit.
    """

    __slots__ = ("nodes", "overlap_edges", "neighbor_edges",
                 "contact_lengths", "pose_indices", "node_features",
                 "edge_features", "l_max", "num_tile_types", "num_poses")

    def __init__(self, nodes, overlap_edges, neighbor_edges, contact_lengths,
                 pose_indices, node_features, edge_features, l_max,
                 num_tile_types, num_poses):
        self.nodes = nodes
        self.overlap_edges = overlap_edges
        self.neighbor_edges = neighbor_edges
        self.contact_lengths = contact_lengths
        self.pose_indices = pose_indices
        self.node_features = node_features
        self.edge_features = edge_features
        self.l_max = l_max
        self.num_tile_types = num_tile_types
        self.num_poses = num_poses

    def __len__(self):
        return len(self.nodes)

    @property
    def areas(self) -> np.ndarray:
        return self.node_features[:, 0]

    def subgraph(self, keep: np.ndarray) -> "AdjacencyGraph":
        """Graph induced on the node indices in `keep` (ascending order
        preserved); no geometry is recomputed."""
        keep = np.asarray(keep, dtype=np.int64)
        remap = -np.ones(len(self.nodes), dtype=np.int64)
        remap[keep] = np.arange(len(keep))

        def cut(edges, *payloads):
            if len(edges) == 0:
                return (edges,) + payloads
            mask = (remap[edges[:, 0]] >= 0) & (remap[edges[:, 1]] >= 0)
            cut_edges = remap[edges[mask]]
            return (cut_edges,) + tuple(p[mask] for p in payloads)

        ovl, = cut(self.overlap_edges)
        nbr, lengths, poses, efeat = cut(self.neighbor_edges,
                                         self.contact_lengths,
                                         self.pose_indices,
                                         self.edge_features)
        return AdjacencyGraph([self.nodes[i] for i in keep], ovl, nbr,
                              lengths, poses,
                              self.node_features[keep], efeat, self.l_max,
                              self.num_tile_types, self.num_poses)


def crop_superset(ss: Superset, region: Region,
                  pose: RigidTransform = IDENTITY) -> list[Placement]:
    """Placements fully inside the region posed over the superset
    (boundary contact within eps_geo allowed)."""
    tol = ss.tileset.tol
    posed = transform_region(region, pose)
    shape = posed.shapely.buffer(tol.eps_geo)
    prepared = shapely.prepared.prep(shape)
    rx0, ry0, rx1, ry1 = shape.bounds
    out = []
    for p in ss.placements:
        x0, y0, x1, y1 = p.polygon.bounds()
        if x0 < rx0 or y0 < ry0 or x1 > rx1 or y1 > ry1:
            continue
        if prepared.covers(p.polygon.shapely):
            out.append(p)
    return out


def _classify_pairs(placements, ss, pairs):
    tol = ss.tileset.tol
    overlaps = []
    neighbors = []
    for i, j in pairs:
        a, b = placements[i], placements[j]
        if interiors_overlap(a.polygon, b.polygon, tol):
            overlaps.append((i, j))
            continue
        contact = shared_boundary_length(a.polygon, b.polygon, tol)
        if contact >= tol.min_contact - tol.eps_geo:
            key = relative_pose_key(a, b, ss.tileset, contact)
            pose = ss.pose_lookup.get(key)
            if pose is None:
                raise PoseTableIncomplete(
                    f"no pose entry for contacting pair {i},{j}: {key}")
            neighbors.append((i, j, contact, pose))
    return overlaps, neighbors


def bruteforce_pairs(placements, ss):
    """All-pairs classification oracle (no spatial pruning); identical
    output contract to the hashed path, kept for verification."""
    n = len(placements)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    return _classify_pairs(placements, ss, pairs)


def build_graph(placements: list[Placement], ss: Superset,
                use_spatial_hash: bool = True) -> AdjacencyGraph:
    """Build the adjacency graph for a set of deduplicated placements."""
    ts = ss.tileset
    order = sorted(range(len(placements)), key=lambda i: placements[i].key)
    nodes = [placements[i] for i in order]

    if use_spatial_hash:
        index = SpatialHash(max(ts.max_diameter, ts.u), eps=ts.tol.eps_geo)
        for i, p in enumerate(nodes):
            index.insert(i, p.polygon.bounds())
        pairs = index.candidate_pairs()
        overlaps, neighbors = _classify_pairs(nodes, ss, pairs)
    else:
        overlaps, neighbors = bruteforce_pairs(nodes, ss)

    n = len(nodes)
    n_t = ts.num_tile_types
    n_p = ss.pose_count
    node_features = np.zeros((n, n_t + 1), dtype=np.float32)
    for i, p in enumerate(nodes):
        node_features[i, 0] = p.area_norm
        node_features[i, 1 + p.prototile_index] = 1.0

    l_max = ts.max_perimeter
    e_n = len(neighbors)
    neighbor_edges = np.zeros((e_n, 2), dtype=np.int64)
    contact_lengths = np.zeros(e_n, dtype=np.float64)
    pose_indices = np.zeros(e_n, dtype=np.int64)
    edge_features = np.zeros((e_n, n_p + 1), dtype=np.float32)
    for row, (i, j, contact, pose) in enumerate(neighbors):
        neighbor_edges[row] = (i, j)
        contact_lengths[row] = contact
        pose_indices[row] = pose
        edge_features[row, 0] = contact / l_max
        edge_features[row, 1 + pose] = 1.0

    overlap_edges = (np.asarray(overlaps, dtype=np.int64).reshape(-1, 2)
                     if overlaps else np.zeros((0, 2), dtype=np.int64))
    return AdjacencyGraph(nodes, overlap_edges, neighbor_edges,
                          contact_lengths, pose_indices, node_features,
                          edge_features, l_max, n_t, n_p)


def mean_degree(g: AdjacencyGraph) -> float:
    if len(g) == 0:
        raise EmptyGraph("mean degree of an empty graph")
    return 2.0 * (len(g.overlap_edges) + len(g.neighbor_edges)) / len(g)
