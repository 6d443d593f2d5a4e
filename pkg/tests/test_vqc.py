import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlstm_rbf.exceptions import ConfigError
from qlstm_rbf.vqc import (
    VqcParams,
    circuit_gates,
    entangler_pairs,
    parameter_shift_gradient,
    vqc_backward,
    vqc_forward,
)

from oracles import central_difference, matrix_oracle_state, rel_err, z_expectations_oracle


def test_identity_circuit():
    np.testing.assert_allclose(vqc_forward([0.0], VqcParams(1, [[0, 0]])), [1.0])


def test_encoding_quarter_turn():
    out = vqc_forward([np.tan(np.pi / 4)], np.zeros((1, 2)))
    np.testing.assert_allclose(out, [np.cos(np.pi / 2)], atol=1e-15)


def test_two_qubit_flip_propagates():
    angles = np.array([[np.pi, 0.0], [0.0, 0.0]])
    out = vqc_forward([0.0, 0.0], angles)
    np.testing.assert_allclose(out, [-1.0, -1.0], atol=1e-12)
    gates = circuit_gates([0.0, 0.0], angles)
    psi = matrix_oracle_state(gates, 2)
    np.testing.assert_allclose(out, z_expectations_oracle(psi, 2), atol=1e-12)


@pytest.mark.parametrize(
    "q, expected",
    [(1, []), (2, [(0, 1)]), (3, [(0, 1), (1, 2), (2, 0)]), (4, [(0, 1), (1, 2), (2, 3), (3, 0)])],
)
def test_ring_topology(q, expected):
    assert entangler_pairs(q) == expected


@pytest.mark.parametrize("q", [1, 2, 3])
def test_forward_matches_matrix_oracle(q):
    rng = np.random.default_rng(q)
    for _ in range(20):
        x = rng.normal(size=q) * 2
        angles = rng.uniform(-np.pi, np.pi, size=(q, 2))
        psi = matrix_oracle_state(circuit_gates(x, angles), q)
        np.testing.assert_allclose(vqc_forward(x, angles), z_expectations_oracle(psi, q), atol=1e-10)


def test_dimension_mismatch():
    with pytest.raises(ConfigError):
        vqc_forward([0.0, 0.0], np.zeros((3, 2)))


def test_non_finite_input():
    with pytest.raises(ConfigError):
        vqc_forward([np.inf], np.zeros((1, 2)))


def test_batched_equals_loop():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(6, 4, 3))
    angles = rng.normal(size=(4, 3, 2))
    batched = vqc_forward(x, angles)
    for b in range(6):
        for g in range(4):
            np.testing.assert_allclose(batched[b, g], vqc_forward(x[b, g], angles[g]), atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(
    st.integers(1, 4),
    st.lists(st.floats(-1e6, 1e6), min_size=4, max_size=4),
    st.integers(0, 2**32 - 1),
)
def test_bounded(q, xs, seed):
    angles = np.random.default_rng(seed).normal(size=(q, 2)) * 3
    out = vqc_forward(np.array(xs[:q]), angles)
    assert np.all(out >= -1.0 - 1e-15) and np.all(out <= 1.0 + 1e-15)


def test_phase_angle_matters():
    x, angles = np.array([0.7]), np.array([[0.5, 0.0]])
    shifted = angles + [[0.0, 1.0]]
    assert abs(vqc_forward(x, angles)[0] - vqc_forward(x, shifted)[0]) > 1e-3
    assert abs(vqc_backward(x, angles, [1.0]).d_angles[0, 1]) == pytest.approx(0.0, abs=1e-15)
    assert abs(vqc_backward(x, shifted, [1.0]).d_angles[0, 1]) > 1e-3


def test_deterministic():
    rng = np.random.default_rng(9)
    x, angles = rng.normal(size=4), rng.normal(size=(4, 2))
    assert vqc_forward(x, angles).tobytes() == vqc_forward(x, angles).tobytes()


class TestGradients:
    def test_single_qubit_ry_derivative_at_zero(self):
        grad = vqc_backward([0.0], np.zeros((1, 2)), [1.0])
        assert grad.d_angles[0, 0] == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("theta", [0.4, np.pi / 2, -2.1])
    def test_single_qubit_ry_derivative(self, theta):
        grad = vqc_backward([0.0], [[theta, 0.0]], [1.0])
        assert grad.d_angles[0, 0] == pytest.approx(-np.sin(theta), abs=1e-14)

    def test_shift_rule_analytic(self):
        grad = parameter_shift_gradient([0.0], [[np.pi / 2, 0.0]], [1.0])
        assert grad.d_angles[0, 0] == pytest.approx(-1.0, abs=1e-14)

    @pytest.mark.parametrize("fn", [vqc_backward, parameter_shift_gradient])
    def test_zero_upstream(self, fn):
        rng = np.random.default_rng(2)
        grad = fn(rng.normal(size=3), rng.normal(size=(3, 2)), np.zeros(3))
        assert not np.any(grad.d_angles) and not np.any(grad.d_input)

    def test_adjoint_matches_shift_rule(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            q = int(rng.integers(1, 5))
            x, angles, up = rng.normal(size=q), rng.uniform(-np.pi, np.pi, (q, 2)), rng.normal(size=q)
            adj = vqc_backward(x, angles, up)
            ps = parameter_shift_gradient(x, angles, up)
            np.testing.assert_allclose(adj.d_angles, ps.d_angles, atol=1e-10)
            np.testing.assert_allclose(adj.d_input, ps.d_input, atol=1e-10)

    def test_adjoint_matches_finite_differences(self):
        rng = np.random.default_rng(22)
        x, angles, up = rng.normal(size=3), rng.uniform(-np.pi, np.pi, (3, 2)), rng.normal(size=3)
        adj = vqc_backward(x, angles, up)
        fd_angles = central_difference(lambda a: up @ vqc_forward(x, a), angles)
        fd_input = central_difference(lambda v: up @ vqc_forward(v, angles), x)
        assert rel_err(adj.d_angles, fd_angles) < 1e-5
        assert rel_err(adj.d_input, fd_input) < 1e-5

    @pytest.mark.parametrize("encoding", ["atan", "linear"])
    @pytest.mark.parametrize("entangler", ["ring", "chain", "none"])
    def test_variants_consistent(self, encoding, entangler):
        rng = np.random.default_rng(4)
        x, angles, up = rng.normal(size=4), rng.normal(size=(4, 2)), rng.normal(size=4)
        kw = dict(encoding=encoding, entangler=entangler)
        adj = vqc_backward(x, angles, up, **kw)
        ps = parameter_shift_gradient(x, angles, up, **kw)
        np.testing.assert_allclose(adj.d_angles, ps.d_angles, atol=1e-10)
        np.testing.assert_allclose(adj.d_input, ps.d_input, atol=1e-10)

    def test_batched_backward(self):
        rng = np.random.default_rng(8)
        x, angles, up = rng.normal(size=(5, 4, 2)), rng.normal(size=(4, 2, 2)), rng.normal(size=(5, 4, 2))
        adj = vqc_backward(x, angles, up)
        for b in range(5):
            for g in range(4):
                single = vqc_backward(x[b, g], angles[g], up[b, g])
                np.testing.assert_allclose(adj.d_angles[b, g], single.d_angles, atol=1e-14)
                np.testing.assert_allclose(adj.d_input[b, g], single.d_input, atol=1e-14)
