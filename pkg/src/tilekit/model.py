"""Two-branch graph network scoring candidate placements.

Per layer, a neighbor-aggregation branch propagates node features through
edge-conditioned convolutions (a per-edge MLP maps each neighbor-edge
feature vector to a CxC mixing matrix), while an overlap-aggregation
branch runs an unlabeled-edge convolution with a learnable self-weight.
The branch outputs are combined by elementwise product, all layer outputs
are concatenated, and a sigmoid head emits per-node selection
probabilities.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class ConfigMismatch(ValueError):
    """Model configuration incompatible with graph features or file."""


class WeightFormatError(ValueError):
    """Weights file is corrupt, truncated, or of an unsupported version."""


WEIGHTS_MAGIC = b"TGNN"
WEIGHTS_VERSION = 1

# sigmoid outputs are kept strictly inside (0, 1); float32 saturates to
# exactly 1.0 otherwise
_PROB_MARGIN = 1e-6

# gain on fan-in-scaled uniform init; the per-layer branch product compounds
# feature magnitudes, so unit-gain init saturates the output sigmoid
_INIT_GAIN = 0.4

# soft cap on head logits: probabilities can still reach sigmoid(+-8)
# (confident selection), but no unit ever leaves the trainable region of
# float32 sigmoid, so late-stage refinements keep flowing
_LOGIT_CAP = 8.0


@dataclass(frozen=True)
class ModelConfig:
    num_tile_types: int
    num_poses: int
    layers: int = 6
    channels: int = 32
    leaky_slope: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.layers < 1 or self.channels < 1:
            raise ConfigMismatch("layers and channels must be >= 1")


class Mlp:
    """Affine stack with leaky-ReLU between layers (none after the last).

    With zero_final=True the last affine starts at exactly zero, so the
    module initially contributes nothing and wakes up through its incoming
    gradient.  Used for the edge/overlap aggregation MLPs and the head:
    the unnormalized overlap sums scale with node degree and the per-layer
    branch product compounds magnitudes, so nonzero aggregation output at
    initialization saturates the network on dense graphs.
    """

    def __init__(self, rng: np.random.Generator, dims: list[int],
                 slope: float, zero_final: bool = False):
        self.slope = slope
        self.weights = []
        self.biases = []
        last = len(dims) - 2
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            bound = _INIT_GAIN * np.sqrt(6.0 / fan_in)
            if zero_final and i == last:
                w = np.zeros((fan_in, fan_out))
                b = np.zeros(fan_out)
            else:
                w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
                # nonzero bias keeps pre-activations off the LReLU kink
                b = rng.uniform(-bound / 2, bound / 2, size=fan_out)
            self.weights.append(ad.parameter(w.astype(np.float32)))
            self.biases.append(ad.parameter(b.astype(np.float32)))

    def __call__(self, x: Tensor) -> Tensor:
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = ad.add(ad.matmul(x, w), b)
            if i < last:
                x = ad.leaky_relu(x, self.slope)
        return x

    def parameters(self, prefix: str):
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            yield f"{prefix}.w{i}", w
            yield f"{prefix}.b{i}", b


class TileNetwork:
    """The placement-scoring network; see module docstring."""

    def __init__(self, config: ModelConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        c = config.channels
        slope = config.leaky_slope
        self.embed = Mlp(rng, [config.num_tile_types + 1, c, c], slope)
        self.layer_w = []
        self.layer_phi = []
        self.layer_theta = []
        self.layer_eps = []
        for _ in range(config.layers):
            bound = _INIT_GAIN * np.sqrt(6.0 / c)
            w = rng.uniform(-bound, bound, size=(c, c)).astype(np.float32)
            self.layer_w.append(ad.parameter(w))
            self.layer_phi.append(Mlp(rng, [config.num_poses + 1, c, c * c],
                                      slope, zero_final=True))
            self.layer_theta.append(Mlp(rng, [c, c, c], slope,
                                        zero_final=True))
            self.layer_eps.append(ad.parameter(np.zeros((), dtype=np.float32)))
        self.head = Mlp(rng, [c * (config.layers + 1), c, 1], slope,
                        zero_final=True)

    def parameters(self) -> list[tuple[str, Tensor]]:
        """All learnable parameters in fixed declaration order."""
        out = list(self.embed.parameters("embed"))
        for l in range(self.config.layers):
            out.append((f"layer{l}.w", self.layer_w[l]))
            out.extend(self.layer_phi[l].parameters(f"layer{l}.phi"))
            out.extend(self.layer_theta[l].parameters(f"layer{l}.theta"))
            out.append((f"layer{l}.eps", self.layer_eps[l]))
        out.extend(self.head.parameters("head"))
        return out

    def zero_grad(self):
        for _, p in self.parameters():
            p.grad = None

    def check_graph(self, graph):
        cfg = self.config
        if graph.node_features.shape[1] != cfg.num_tile_types + 1:
            raise ConfigMismatch(
                f"graph node features have {graph.node_features.shape[1]} "
                f"columns, model expects {cfg.num_tile_types + 1}")
        if graph.edge_features.shape[1] != cfg.num_poses + 1:
            raise ConfigMismatch(
                f"graph edge features have {graph.edge_features.shape[1]} "
                f"columns, model expects {cfg.num_poses + 1}")

    def forward(self, graph, record: bool = False) -> Tensor:
        """Selection probabilities for every node, all strictly in (0, 1).

        With record=True the computation graph is retained for backward().
        """
        if len(graph) == 0:
            raise ConfigMismatch("forward on an empty graph")
        self.check_graph(graph)
        ctx = _null_context() if record else ad.no_grad()
        with ctx:
            return self._forward(graph)

    def _forward(self, graph) -> Tensor:
        cfg = self.config
        n = len(graph)
        slope = cfg.leaky_slope
        nbr = graph.neighbor_edges
        ovl = graph.overlap_edges
        have_nbr = len(nbr) > 0
        have_ovl = len(ovl) > 0
        if have_ovl:
            ovl_src = np.concatenate([ovl[:, 1], ovl[:, 0]])
            ovl_dst = np.concatenate([ovl[:, 0], ovl[:, 1]])

        v = ad.tensor(graph.node_features)
        f = self.embed(v)
        g = f
        feats = [f]
        edge_feat = ad.tensor(graph.edge_features)
        for l in range(cfg.layers):
            agg = ad.matmul(f, self.layer_w[l])
            if have_nbr:
                phi = ad.reshape(self.layer_phi[l](edge_feat),
                                 (len(nbr), cfg.channels, cfg.channels))
                m_fwd = ad.bmm_vec(ad.gather_rows(f, nbr[:, 1]), phi)
                m_rev = ad.bmm_vec(ad.gather_rows(f, nbr[:, 0]), phi)
                agg = ad.add(agg, ad.scatter_rows(m_fwd, nbr[:, 0], n))
                agg = ad.add(agg, ad.scatter_rows(m_rev, nbr[:, 1], n))
            h = ad.add(ad.leaky_relu(agg, slope), f)

            pre = ad.mul(g, ad.add(self.layer_eps[l], 1.0))
            if have_ovl:
                pre = ad.add(pre, ad.scatter_rows(
                    ad.gather_rows(g, ovl_src), ovl_dst, n))
            g = ad.add(ad.leaky_relu(self.layer_theta[l](pre), slope), g)

            f = ad.mul(h, g)
            feats.append(f)

        merged = ad.concat(feats, axis=1)
        logits = ad.mul(ad.tanh(ad.mul(self.head(merged), 1.0 / _LOGIT_CAP)),
                        _LOGIT_CAP)
        # linear squash into (margin, 1 - margin): strictly inside (0, 1)
        # even where float32 sigmoid saturates, and, unlike a hard clamp,
        # the gradient never dies (saturated nodes can recover in training)
        probs = ad.add(_PROB_MARGIN,
                       ad.mul(ad.sigmoid(logits), 1.0 - 2.0 * _PROB_MARGIN))
        return ad.reshape(probs, (n,))

    def predict(self, graph) -> np.ndarray:
        """Inference-only probabilities as a plain float32 vector."""
        return self.forward(graph, record=False).data.copy()


class _null_context:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def save_weights(model: TileNetwork, path):
    cfg = model.config
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        fh.write(struct.pack("<I", WEIGHTS_VERSION))
        fh.write(struct.pack("<4i", cfg.layers, cfg.channels,
                             cfg.num_tile_types, cfg.num_poses))
        for _, p in model.parameters():
            fh.write(p.data.astype("<f4").tobytes())


def _read_exact(fh, count, what):
    buf = fh.read(count)
    if len(buf) != count:
        raise WeightFormatError(f"truncated weights file while reading {what}")
    return buf


def load_weights(path, expected_config: ModelConfig | None = None) -> TileNetwork:
    """Reconstruct a model from a weights file.

    If expected_config is given, its tile-type/pose counts must match the
    file header (ConfigMismatch otherwise).
    """
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != WEIGHTS_MAGIC:
            raise WeightFormatError(f"bad magic {magic!r}")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != WEIGHTS_VERSION:
            raise WeightFormatError(f"unsupported weights version {version}")
        layers, channels, num_tile_types, num_poses = struct.unpack(
            "<4i", _read_exact(fh, 16, "config"))
        if expected_config is not None:
            if (expected_config.num_tile_types != num_tile_types
                    or expected_config.num_poses != num_poses):
                raise ConfigMismatch(
                    f"weights built for {num_tile_types} tile types / "
                    f"{num_poses} poses, expected "
                    f"{expected_config.num_tile_types}/{expected_config.num_poses}")
            cfg = expected_config
        else:
            cfg = ModelConfig(num_tile_types=num_tile_types,
                              num_poses=num_poses, layers=layers,
                              channels=channels)
        if (cfg.layers, cfg.channels) != (layers, channels):
            raise ConfigMismatch("layer/channel counts differ from file")
        model = TileNetwork(cfg)
        for name, p in model.parameters():
            raw = _read_exact(fh, p.data.size * 4, name)
            p.data = np.frombuffer(raw, dtype="<f4").reshape(p.data.shape).copy()
        # checkpoints append an optimizer-state section after the weights
        trailing = fh.read(4)
        if trailing and trailing != b"ADAM":
            raise WeightFormatError("unexpected trailing bytes")
    return model
