"""Self-supervised tiling losses.

Three log-based terms, each with range [1, inf): a coverage term over node
areas, an overlap penalty over overlap edges, and a contact term over
neighbor edges.  The total is their product (a weighted sum is available
behind an ablation flag only; it is known not to train well).  Log
arguments are clamped at eps_log so saturated probabilities cannot produce
infinities; the clamped region propagates zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .graph import AdjacencyGraph, EmptyGraph


@dataclass(frozen=True)
class LossWeights:
    w_a: float = 1.0
    w_o: float = 10.0
    w_e: float = 0.02
    eps_log: float = 1e-7


def loss_area(x: Tensor, areas: np.ndarray, w_a: float = 1.0,
              eps_log: float = 1e-7) -> Tensor:
    """Coverage term: 1 - w_a * ln(sum(A*x) / sum(A))."""
    if x.data.size == 0:
        raise EmptyGraph("coverage loss over an empty node set")
    a = ad.tensor(np.asarray(areas, dtype=np.float32))
    ratio = ad.mul(ad.reduce_sum(ad.mul(a, x)), 1.0 / float(np.sum(areas)))
    return ad.add(1.0, ad.mul(ad.log(ad.clamp(ratio, eps_log, 1.0)), -w_a))


def loss_overlap(x: Tensor, overlap_edges: np.ndarray, w_o: float = 10.0,
                 eps_log: float = 1e-7) -> Tensor:
    """Overlap term: 1 - w_o * mean(ln(1 - x_i*x_k)); 1 when no overlap
    edges exist (neutral element of the product)."""
    if len(overlap_edges) == 0:
        return ad.tensor(np.float32(1.0))
    xi = ad.gather_rows(x, overlap_edges[:, 0])
    xk = ad.gather_rows(x, overlap_edges[:, 1])
    args = ad.clamp(ad.add(1.0, ad.mul(ad.mul(xi, xk), -1.0)), eps_log, None)
    return ad.add(1.0, ad.mul(ad.reduce_mean(ad.log(args)), -w_o))


def loss_edges(x: Tensor, neighbor_edges: np.ndarray,
               contact_lengths: np.ndarray, l_max: float,
               w_e: float = 0.02, eps_log: float = 1e-7) -> Tensor:
    """Gap term: 1 - w_e * mean(ln(x_i*x_k*L/L_max)); 1 when no neighbor
    edges exist."""
    if len(neighbor_edges) == 0:
        return ad.tensor(np.float32(1.0))
    xi = ad.gather_rows(x, neighbor_edges[:, 0])
    xk = ad.gather_rows(x, neighbor_edges[:, 1])
    ratio = ad.tensor((np.asarray(contact_lengths) / l_max).astype(np.float32))
    args = ad.clamp(ad.mul(ad.mul(xi, xk), ratio), eps_log, 1.0)
    return ad.add(1.0, ad.mul(ad.reduce_mean(ad.log(args)), -w_e))


def loss_total(la: Tensor, lo: Tensor, le: Tensor,
               combine: str = "product") -> Tensor:
    if combine == "product":
        return ad.mul(ad.mul(la, lo), le)
    if combine == "sum":
        return ad.add(ad.add(la, lo), le)
    raise ValueError(f"unknown combine mode {combine!r}")


def tiling_loss(x: Tensor, graph: AdjacencyGraph,
                weights: LossWeights = LossWeights(),
                combine: str = "product") -> tuple[Tensor, dict]:
    """Total loss plus the individual term values."""
    la = loss_area(x, graph.areas, weights.w_a, weights.eps_log)
    lo = loss_overlap(x, graph.overlap_edges, weights.w_o, weights.eps_log)
    le = loss_edges(x, graph.neighbor_edges, graph.contact_lengths,
                    graph.l_max, weights.w_e, weights.eps_log)
    total = loss_total(la, lo, le, combine)
    parts = {"area": float(la.data), "overlap": float(lo.data),
             "edges": float(le.data), "total": float(total.data)}
    return total, parts


def selection_loss(selected: np.ndarray, graph: AdjacencyGraph,
                   weights: LossWeights = LossWeights()) -> float:
    """Loss of a binary selection (plain numpy, no gradients); used to
    score finished tiling solutions."""
    if len(graph) == 0:
        raise EmptyGraph("loss of a selection on an empty graph")
    x = np.asarray(selected, dtype=np.float64)
    eps = weights.eps_log
    areas = graph.areas.astype(np.float64)
    la = 1.0 - weights.w_a * np.log(np.clip(
        float(areas @ x) / float(areas.sum()), eps, 1.0))
    if len(graph.overlap_edges) == 0:
        lo = 1.0
    else:
        prod = x[graph.overlap_edges[:, 0]] * x[graph.overlap_edges[:, 1]]
        lo = 1.0 - weights.w_o * float(np.mean(np.log(np.clip(1.0 - prod, eps, None))))
    if len(graph.neighbor_edges) == 0:
        le = 1.0
    else:
        prod = (x[graph.neighbor_edges[:, 0]] * x[graph.neighbor_edges[:, 1]]
                * graph.contact_lengths / graph.l_max)
        le = 1.0 - weights.w_e * float(np.mean(np.log(np.clip(prod, eps, 1.0))))
    return float(la * lo * le)
