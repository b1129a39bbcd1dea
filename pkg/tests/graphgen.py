"""Synthetic adjacency graphs for network/loss tests: structurally valid
features (normalized areas, exact one-hots) over random edge sets, with no
geometry behind them."""

import numpy as np

from tilekit.graph import AdjacencyGraph


def make_random_graph(rng, n, n_t=2, n_p=4, edge_prob=0.25, l_max=6.0):
    node_features = np.zeros((n, n_t + 1), dtype=np.float32)
    node_features[:, 0] = rng.uniform(0.2, 1.0, size=n)
    types = rng.integers(0, n_t, size=n)
    node_features[np.arange(n), 1 + types] = 1.0

    overlaps, neighbors = [], []
    for i in range(n):
        for j in range(i + 1, n):
            r = rng.uniform()
            if r < edge_prob / 2:
                overlaps.append((i, j))
            elif r < edge_prob:
                neighbors.append((i, j))
    overlap_edges = (np.asarray(overlaps, dtype=np.int64).reshape(-1, 2)
                     if overlaps else np.zeros((0, 2), dtype=np.int64))
    neighbor_edges = (np.asarray(neighbors, dtype=np.int64).reshape(-1, 2)
                      if neighbors else np.zeros((0, 2), dtype=np.int64))
    e_n = len(neighbor_edges)
    contact_lengths = rng.uniform(0.5, l_max / 2, size=e_n)
    pose_indices = rng.integers(0, n_p, size=e_n)
    edge_features = np.zeros((e_n, n_p + 1), dtype=np.float32)
    if e_n:
        edge_features[:, 0] = contact_lengths / l_max
        edge_features[np.arange(e_n), 1 + pose_indices] = 1.0

    nodes = [f"synthetic-{i}" for i in range(n)]
    return AdjacencyGraph(nodes, overlap_edges, neighbor_edges,
                          contact_lengths, pose_indices, node_features,
                          edge_features, l_max, n_t, n_p)


def permute_graph(g, perm):
    """Graph with nodes reordered by perm (new_index = position of
    old_index in perm)."""
    inv = np.empty(len(perm), dtype=np.int64)
    inv[perm] = np.arange(len(perm))

    def remap(edges):
        return inv[edges] if len(edges) else edges

    return AdjacencyGraph([g.nodes[i] for i in perm],
                          remap(g.overlap_edges), remap(g.neighbor_edges),
                          g.contact_lengths, g.pose_indices,
                          g.node_features[perm], g.edge_features,
                          g.l_max, g.num_tile_types, g.num_poses)
