import math

import numpy as np
import numpy.testing as npt
import pytest

from devnet.network import (
    Architecture,
    Parameters,
    backward,
    forward,
    glorot_bound,
    init_parameters,
    score,
)
from tests.helpers import (
    central_difference,
    random_parameters,
    relative_error,
    weighted_score_fn,
)


def tiny_net(w1=2.0, b1=0.0, wo=3.0, bo=1.0):
    """1-1-1 network: one input, one hidden ReLU unit, linear output."""
    arch = Architecture(1, (1,))
    return Parameters(arch, [np.array([[w1]])], [np.array([b1])], np.array([wo, bo]))


class TestArchitecture:
    def test_validation(self):
        with pytest.raises(ValueError):
            Architecture(0, (5,))
        with pytest.raises(ValueError):
            Architecture(3, (5, 0))
        with pytest.raises(ValueError):
            Architecture(3, (), rep_mode=True)

    def test_rep_dim(self):
        assert Architecture(7, (20,)).rep_dim == 20
        assert Architecture(7, ()).rep_dim == 7


class TestInit:
    def test_square_fan_bound_is_one(self):
        assert glorot_bound(3, 3) == 1.0

    def test_shapes_one_hidden_layer(self):
        params = init_parameters(Architecture(21, (20,)), seed=0)
        assert params.hidden_weights[0].shape == (21, 20)
        assert params.hidden_biases[0].shape == (20,)
        assert params.output.shape == (21,)

    def test_bound_21_20(self):
        # closed form, evaluated independently of the implementation
        expected = math.sqrt(6.0 / (21 + 20))
        assert glorot_bound(21, 20) == pytest.approx(expected, rel=0, abs=0)
        assert expected == pytest.approx(0.38255, abs=5e-6)
        params = init_parameters(Architecture(21, (20,)), seed=7)
        w = params.hidden_weights[0]
        assert np.all(np.abs(w) <= expected)
        assert np.abs(w).max() > 0.9 * expected  # 420 draws get close to the bound

    def test_biases_zero(self):
        params = init_parameters(Architecture(4, (5, 6)), seed=3)
        for b in params.hidden_biases:
            assert np.all(b == 0.0)
        assert params.output[-1] == 0.0

    def test_deterministic(self):
        a = init_parameters(Architecture(6, (8, 4)), seed=11)
        b = init_parameters(Architecture(6, (8, 4)), seed=11)
        for (_, x), (_, y) in zip(a.named_arrays(), b.named_arrays()):
            npt.assert_array_equal(x, y)
        c = init_parameters(Architecture(6, (8, 4)), seed=12)
        assert not np.array_equal(a.hidden_weights[0], c.hidden_weights[0])

    def test_rep_mode_has_no_output(self):
        params = init_parameters(Architecture(5, (4,), rep_mode=True), seed=0)
        assert params.output is None


class TestForward:
    def test_constant_network(self):
        arch = Architecture(3, (4,))
        params = Parameters(arch, [np.zeros((3, 4))], [np.zeros(4)],
                            np.append(np.zeros(4), 0.7))
        scores, _ = forward(params, np.random.default_rng(0).normal(size=(9, 3)))
        npt.assert_array_equal(scores, np.full(9, 0.7))

    def test_relu_clamps_negative_preactivation(self):
        scores, _ = forward(tiny_net(), np.array([[-1.0]]))
        assert scores[0] == 1.0

    def test_hand_evaluated_composition(self):
        scores, _ = forward(tiny_net(), np.array([[0.5]]))
        assert scores[0] == 4.0  # 3 * relu(2 * 0.5) + 1

    def test_shape_error(self):
        params = init_parameters(Architecture(3, (4,)), seed=0)
        with pytest.raises(ValueError, match="columns"):
            forward(params, np.zeros((2, 5)))
        with pytest.raises(ValueError, match="2-D"):
            forward(params, np.zeros(3))

    def test_rep_mode_returns_representation(self):
        params = init_parameters(Architecture(3, (4,), rep_mode=True), seed=0)
        out, _ = forward(params, np.zeros((2, 3)))
        assert out.shape == (2, 4)


class TestScore:
    def test_zero_network(self):
        arch = Architecture(2, (3,))
        params = Parameters(arch, [np.zeros((2, 3))], [np.zeros(3)], np.zeros(4))
        assert score(params, np.array([5.0, -2.0])) == 0.0

    def test_matches_forward_bitwise(self):
        rng = np.random.default_rng(42)
        params = random_parameters(Architecture(6, (5, 3)), rng)
        rows = rng.normal(size=(10, 6))
        batch_scores, _ = forward(params, rows)
        for i, row in enumerate(rows):
            assert score(params, row) == batch_scores[i]

    def test_hand_case(self):
        assert score(tiny_net(), np.array([0.5])) == 4.0


class TestBackward:
    def test_zero_dscore_zero_gradients(self):
        rng = np.random.default_rng(0)
        params = random_parameters(Architecture(4, (6,)), rng)
        _, cache = forward(params, rng.normal(size=(5, 4)))
        grads = backward(params, cache, np.zeros(5))
        for _, g in grads.named_arrays():
            assert np.all(g == 0.0)

    def test_hand_chain_rule(self):
        params = tiny_net()
        _, cache = forward(params, np.array([[0.5]]))
        grads = backward(params, cache, np.array([1.0]))
        assert grads.output[0] == 1.0       # relu(2 * 0.5)
        assert grads.output[1] == 1.0       # output bias
        assert grads.hidden_weights[0][0, 0] == 1.5  # 3 * 0.5
        assert grads.hidden_biases[0][0] == 3.0

    def test_cache_mismatch_rejected(self):
        params = init_parameters(Architecture(3, (4,)), seed=0)
        _, cache = forward(params, np.zeros((6, 3)))
        with pytest.raises(ValueError, match="dscore"):
            backward(params, cache, np.zeros(5))

    @pytest.mark.parametrize("hidden,rep", [((7,), False), ((9, 6), False),
                                            ((5, 4, 3), False), ((), False),
                                            ((6,), True)])
    def test_matches_finite_differences(self, hidden, rep):
        rng = np.random.default_rng(hash((hidden, rep)) % 2**32)
        arch = Architecture(5, hidden, rep_mode=rep)
        params = random_parameters(arch, rng)
        batch = rng.normal(size=(8, 5))
        if rep:
            weights = rng.normal(size=(8, arch.rep_dim))
        else:
            weights = rng.normal(size=8)

        out, cache = forward(params, batch)
        analytic = backward(params, cache, weights)
        flat_analytic = np.concatenate([g.ravel() for _, g in analytic.named_arrays()])

        def fn(p):
            o, c = forward(p, batch)
            pattern = b"".join((z > 0).tobytes() for z in c.pre_activations)
            return float((weights * o).sum()), pattern

        fd, valid = central_difference(fn, params)
        err = relative_error(flat_analytic[valid], fd[valid])
        assert err.max() < 1e-4


class TestProperties:
    def test_gradient_layout_matches_parameters(self):
        rng = np.random.default_rng(1)
        params = random_parameters(Architecture(4, (5, 3)), rng)
        _, cache = forward(params, rng.normal(size=(6, 4)))
        grads = backward(params, cache, rng.normal(size=6))
        for (name_p, p), (name_g, g) in zip(params.named_arrays(), grads.named_arrays()):
            assert name_p == name_g and p.shape == g.shape

    def test_piecewise_linear_in_input(self):
        rng = np.random.default_rng(5)
        params = random_parameters(Architecture(6, (8, 5)), rng)
        x = rng.normal(size=6)
        u = rng.normal(size=6) * 1e-3
        pts = [x, x + u, x + 2 * u]
        vals, patterns = [], []
        for p in pts:
            out, cache = forward(params, p[np.newaxis, :])
            vals.append(out[0])
            patterns.append(b"".join((z > 0).tobytes() for z in cache.pre_activations))
        assert patterns[0] == patterns[1] == patterns[2]
        assert vals[0] - 2 * vals[1] + vals[2] == pytest.approx(0.0, abs=1e-9)

    def test_piecewise_linear_in_weights(self):
        rng = np.random.default_rng(6)
        arch = Architecture(4, (6,))
        params = random_parameters(arch, rng)
        direction = rng.normal(size=params.hidden_weights[0].shape) * 1e-4
        x = rng.normal(size=(3, 4))
        vals = []
        for t in (0.0, 1.0, 2.0):
            p = params.copy()
            p.hidden_weights[0] = params.hidden_weights[0] + t * direction
            out, _ = forward(p, x)
            vals.append(out.sum())
        assert vals[0] - 2 * vals[1] + vals[2] == pytest.approx(0.0, abs=1e-9)
