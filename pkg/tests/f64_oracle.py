"""Float64 re-implementation of the network forward pass and loss, written
with plain numpy and no autodiff classes.  Serves as the independent oracle
for gradient finite-difference checks: evaluating the loss in float64 keeps
central-difference cancellation noise far below the 32-bit tolerance being
verified.
"""

import numpy as np

PROB_MARGIN = 1e-6
LOGIT_CAP = 8.0


def _lrelu(x, slope):
    return np.where(x < 0, x * slope, x)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ez = np.exp(x[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _mlp(params, prefix, x, slope):
    i = 0
    while f"{prefix}.w{i}" in params:
        w = params[f"{prefix}.w{i}"].astype(np.float64)
        b = params[f"{prefix}.b{i}"].astype(np.float64)
        x = x @ w + b
        if f"{prefix}.w{i + 1}" in params:
            x = _lrelu(x, slope)
        i += 1
    return x


def forward_f64(params, cfg, graph):
    """Per-node probabilities, float64 throughout."""
    slope = cfg.leaky_slope
    c = cfg.channels
    n = len(graph)
    nbr = graph.neighbor_edges
    ovl = graph.overlap_edges

    f = _mlp(params, "embed", graph.node_features.astype(np.float64), slope)
    g = f
    feats = [f]
    e_feat = graph.edge_features.astype(np.float64)
    for l in range(cfg.layers):
        agg = f @ params[f"layer{l}.w"].astype(np.float64)
        if len(nbr):
            phi = _mlp(params, f"layer{l}.phi", e_feat, slope).reshape(len(nbr), c, c)
            m_fwd = np.einsum("ec,ecd->ed", f[nbr[:, 1]], phi)
            m_rev = np.einsum("ec,ecd->ed", f[nbr[:, 0]], phi)
            np.add.at(agg, nbr[:, 0], m_fwd)
            np.add.at(agg, nbr[:, 1], m_rev)
        h = _lrelu(agg, slope) + f

        pre = (1.0 + float(params[f"layer{l}.eps"])) * g
        if len(ovl):
            np.add.at(pre, ovl[:, 0], g[ovl[:, 1]])
            np.add.at(pre, ovl[:, 1], g[ovl[:, 0]])
        g = _lrelu(_mlp(params, f"layer{l}.theta", pre, slope), slope) + g

        f = h * g
        feats.append(f)

    raw = _mlp(params, "head", np.concatenate(feats, axis=1), slope)
    logits = LOGIT_CAP * np.tanh(raw / LOGIT_CAP)
    squashed = PROB_MARGIN + (1.0 - 2.0 * PROB_MARGIN) * _sigmoid(logits)
    return squashed.reshape(n)


def loss_f64(x, graph, w_a=1.0, w_o=10.0, w_e=0.02, eps_log=1e-7):
    areas = graph.areas.astype(np.float64)
    la = 1.0 - w_a * np.log(np.clip((areas * x).sum() / areas.sum(), eps_log, 1.0))
    if len(graph.overlap_edges):
        prod = x[graph.overlap_edges[:, 0]] * x[graph.overlap_edges[:, 1]]
        lo = 1.0 - w_o * np.mean(np.log(np.clip(1.0 - prod, eps_log, None)))
    else:
        lo = 1.0
    if len(graph.neighbor_edges):
        prod = (x[graph.neighbor_edges[:, 0]] * x[graph.neighbor_edges[:, 1]]
                * graph.contact_lengths / graph.l_max)
        le = 1.0 - w_e * np.mean(np.log(np.clip(prod, eps_log, 1.0)))
    else:
        le = 1.0
    return la * lo * le


def total_loss_f64(params, cfg, graph, **weights):
    return loss_f64(forward_f64(params, cfg, graph), graph, **weights)
