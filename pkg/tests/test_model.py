import numpy as np
import pytest

from f64_oracle import forward_f64, total_loss_f64
from graphgen import make_random_graph, permute_graph
from tilekit import autodiff as ad
from tilekit.graph import build_graph, crop_superset
from tilekit.geom import Region, make_polygon
from tilekit.loss import tiling_loss
from tilekit.model import (
    ConfigMismatch,
    ModelConfig,
    TileNetwork,
    WeightFormatError,
    load_weights,
    save_weights,
)

SMALL = ModelConfig(num_tile_types=2, num_poses=4, layers=2, channels=8, seed=3)


def param_dict(model):
    return {name: p.data for name, p in model.parameters()}


def analytic_grads(model, graph):
    model.zero_grad()
    x = model.forward(graph, record=True)
    total, _ = tiling_loss(x, graph)
    total.backward()
    return {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
            for name, p in model.parameters()}


def fd_grad(model, graph, name, flat_index, h=1e-4):
    """Central differences through the float64 oracle; h small enough that
    LReLU kink crossings and product-architecture curvature stay below the
    32-bit tolerance being verified."""
    params = param_dict(model)
    arr = params[name].reshape(-1)
    orig = arr[flat_index]
    arr[flat_index] = orig + h
    hi = total_loss_f64(params, model.config, graph)
    arr[flat_index] = orig - h
    lo = total_loss_f64(params, model.config, graph)
    arr[flat_index] = orig
    return (hi - lo) / (2 * h)


class TestForward:
    def test_single_isolated_node(self):
        rng = np.random.default_rng(0)
        g = make_random_graph(rng, 1, edge_prob=0.0)
        model = TileNetwork(SMALL)
        x = model.predict(g)
        assert x.shape == (1,)
        assert 0.0 < x[0] < 1.0

    def test_output_strictly_in_unit_interval(self):
        rng = np.random.default_rng(1)
        model = TileNetwork(SMALL)
        for _ in range(5):
            g = make_random_graph(rng, int(rng.integers(2, 40)))
            x = model.predict(g)
            assert np.all(x > 0.0) and np.all(x < 1.0)

    def test_deterministic_repeat_calls(self):
        rng = np.random.default_rng(2)
        g = make_random_graph(rng, 25)
        model = TileNetwork(SMALL)
        a = model.predict(g)
        b = model.predict(g)
        np.testing.assert_array_equal(a, b)

    def test_matches_f64_oracle_closely(self):
        rng = np.random.default_rng(3)
        g = make_random_graph(rng, 20)
        model = TileNetwork(SMALL)
        x32 = model.predict(g)
        x64 = forward_f64(param_dict(model), model.config, g)
        np.testing.assert_allclose(x32, x64, atol=1e-4)

    def test_feature_width_mismatch(self):
        rng = np.random.default_rng(4)
        g = make_random_graph(rng, 5, n_t=3)
        with pytest.raises(ConfigMismatch):
            TileNetwork(SMALL).predict(g)

    def test_permutation_equivariance_rebuilt_graph_bitwise(
            self, square_domino_superset):
        # the production path: graphs built from permuted placements are
        # canonicalized, so outputs correspond exactly
        ss = square_domino_superset
        region = Region(make_polygon([(-2, -2), (3, -2), (3, 3), (-2, 3)]))
        ps = crop_superset(ss, region)
        rng = np.random.default_rng(5)
        shuffled = [ps[i] for i in rng.permutation(len(ps))]
        g1 = build_graph(ps, ss)
        g2 = build_graph(shuffled, ss)
        cfg = ModelConfig(num_tile_types=ss.tileset.num_tile_types,
                          num_poses=ss.pose_count, layers=2, channels=8)
        model = TileNetwork(cfg)
        np.testing.assert_array_equal(model.predict(g1), model.predict(g2))

    def test_permutation_equivariance_raw_arrays(self):
        # mathematical equivariance on directly permuted arrays (float
        # association noise only)
        rng = np.random.default_rng(6)
        g = make_random_graph(rng, 30)
        perm = rng.permutation(30)
        model = TileNetwork(SMALL)
        x = model.predict(g)
        x_perm = model.predict(permute_graph(g, perm))
        np.testing.assert_allclose(x_perm, x[perm], atol=2e-5)


class TestBackward:
    def test_gradients_match_f64_finite_differences(self):
        # smaller-sample version of the acceptance criterion (which runs 20
        # graphs and enforces the strict >=99% bar); extra slack here covers
        # sampling noise on ~120 probes
        rng = np.random.default_rng(7)
        failures = 0
        probes = 0
        for _ in range(5):
            g = make_random_graph(rng, int(rng.integers(6, 12)))
            model = TileNetwork(SMALL)
            grads = analytic_grads(model, g)
            names = [n for n, _ in model.parameters()]
            for _ in range(24):
                name = names[rng.integers(len(names))]
                idx = int(rng.integers(grads[name].size))
                analytic = float(grads[name].reshape(-1)[idx])
                fd = fd_grad(model, g, name, idx)
                rel = abs(analytic - fd) / max(abs(analytic), 1e-8)
                probes += 1
                if rel >= 1e-3:
                    failures += 1
        assert failures <= max(3, probes * 0.025)

    def test_head_bias_gradient_hand_derived(self):
        # zero final head weight => raw logit is b2, capped logit is
        # z = c*tanh(b2/c), x = sigmoid(z); single node, no edges:
        # loss = 1 - ln(x), hence dL/db2 = (sigmoid(z) - 1) * tanh'(b2/c)
        rng = np.random.default_rng(8)
        g = make_random_graph(rng, 1, edge_prob=0.0)
        model = TileNetwork(SMALL)
        model.head.weights[-1].data[:] = 0.0
        b2 = model.head.biases[-1]
        b2.data[:] = 0.3
        model.zero_grad()
        x = model.forward(g, record=True)
        total, _ = tiling_loss(x, g)
        total.backward()
        cap = 8.0
        z = cap * np.tanh(0.3 / cap)
        sig = 1.0 / (1.0 + np.exp(-z))
        expected = (sig - 1.0) * (1.0 - np.tanh(0.3 / cap) ** 2)
        assert float(x.data[0]) == pytest.approx(sig, abs=1e-6)
        assert float(b2.grad[0]) == pytest.approx(expected, abs=1e-5)

    def test_unreached_parameter_zero_grad(self):
        rng = np.random.default_rng(9)
        g = make_random_graph(rng, 4, edge_prob=0.0)
        model = TileNetwork(SMALL)
        model.zero_grad()
        x = model.forward(g, record=True)
        total, _ = tiling_loss(x, g)
        total.backward()
        # no neighbor edges: every edge-mixing MLP is out of the graph
        assert model.layer_phi[0].weights[0].grad is None

    def test_epsilon_initialized_to_zero(self):
        model = TileNetwork(SMALL)
        for eps in model.layer_eps:
            assert float(eps.data) == 0.0


class TestWeightsRoundTrip:
    def test_save_load_bitwise_forward(self, tmp_path):
        rng = np.random.default_rng(10)
        g = make_random_graph(rng, 15)
        model = TileNetwork(SMALL)
        path = tmp_path / "m.tgnn"
        save_weights(model, path)
        loaded = load_weights(path)
        np.testing.assert_array_equal(model.predict(g), loaded.predict(g))

    def test_truncated_file(self, tmp_path):
        model = TileNetwork(SMALL)
        path = tmp_path / "m.tgnn"
        save_weights(model, path)
        raw = path.read_bytes()
        path.write_bytes(raw[:len(raw) // 2])
        with pytest.raises(WeightFormatError):
            load_weights(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.tgnn"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(WeightFormatError):
            load_weights(path)

    def test_tile_type_mismatch(self, tmp_path):
        model = TileNetwork(SMALL)
        path = tmp_path / "m.tgnn"
        save_weights(model, path)
        other = ModelConfig(num_tile_types=3, num_poses=4, layers=2, channels=8)
        with pytest.raises(ConfigMismatch):
            load_weights(path, expected_config=other)
