import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spatialdnn.net import (
    AdamState, Batch, NetworkParams, NetworkShape, adam_step, backward, default_width, forward,
    init_params, lipschitz_bound, loss, param_distance_sq, predict, project_constraints,
)

from oracles import finite_difference, finite_difference_extended, relative_error

TANH_TANH_1 = 0.64201499201199982


def zeros(q, r, v1=2.0, v2=2.0):
    return NetworkParams(np.zeros(r + 1), np.zeros((r, r + 1)), np.zeros((r, q + 1)), v1, v2)


def random_feasible(rng, q, r, budget=3.0):
    p = NetworkParams(
        rng.normal(size=r + 1), rng.normal(size=(r, r + 1)), rng.normal(size=(r, q + 1)), budget, budget
    )
    return project_constraints(p)


def test_param_count():
    s = NetworkShape(3, 2)
    assert s.n_params == 3 + 2 * 3 + 2 * 4
    assert init_params(s, 2, 2, 0).flat().size == s.n_params
    with pytest.raises(ValueError):
        NetworkShape(0, 2)


def test_init_scale_and_feasibility():
    p = init_params(NetworkShape(3, 2), 2.0, 2.0, seed=4)
    # a = min(0.5, 2/4, 2/3) = 0.5
    assert np.max(np.abs(p.flat())) <= 0.5
    assert p.is_feasible()
    small = init_params(NetworkShape(40, 6), 2.0, 2.0, seed=4)
    assert np.max(np.abs(small.upsilon)) <= 2.0 / 41


@settings(max_examples=40, deadline=None)
@given(q=st.integers(1, 60), r=st.integers(1, 12), v1=st.floats(1.01, 5), v2=st.floats(1.01, 5),
       seed=st.integers(0, 2**32))
def test_init_always_feasible(q, r, v1, v2, seed):
    p = init_params(NetworkShape(q, r), v1, v2, seed)
    assert p.is_feasible()
    assert np.array_equal(p.flat(), init_params(NetworkShape(q, r), v1, v2, seed).flat())


def test_init_rejects_small_budgets():
    with pytest.raises(ValueError):
        init_params(NetworkShape(2, 2), 1.0, 2.0, 0)


def test_forward_bias_only():
    p = zeros(4, 3)
    p.theta[0] = 1.75
    assert forward(p, np.arange(4.0)) == 1.75


def test_forward_hand_composition():
    p = NetworkParams(np.array([0.0, 1.0]), np.array([[0.0, 1.0]]), np.array([[0.0, 1.0]]))
    assert forward(p, [1.0]) == pytest.approx(TANH_TANH_1, abs=1e-15)
    assert TANH_TANH_1 == pytest.approx(math.tanh(math.tanh(1.0)), rel=1e-15)


def test_forward_odd_without_biases():
    rng = np.random.default_rng(0)
    p = random_feasible(rng, 5, 3)
    p.theta[0] = 0.0
    p.nu[:, 0] = 0.0
    p.upsilon[:, 0] = 0.0
    x = rng.uniform(-1, 1, 5)
    assert forward(p, -x) == pytest.approx(-forward(p, x), abs=1e-15)


def test_forward_dimension_mismatch():
    with pytest.raises(ValueError):
        forward(zeros(3, 2), np.ones(4))
    with pytest.raises(ValueError):
        predict(zeros(3, 2), np.ones((5, 2)))


def test_predict_matches_forward():
    rng = np.random.default_rng(1)
    p = random_feasible(rng, 4, 3)
    x = rng.normal(size=(6, 4))
    assert np.allclose(predict(p, x), [forward(p, row) for row in x], rtol=0, atol=1e-15)


@pytest.mark.parametrize("targets,expected", [([1.0], 1.0), ([1.0, -3.0], 5.0)])
def test_loss_examples(targets, expected):
    b = Batch(np.zeros((len(targets), 2)), np.array(targets))
    assert loss(zeros(2, 2), b) == expected


def test_loss_zero_at_fit_and_empty_batch():
    rng = np.random.default_rng(2)
    p = random_feasible(rng, 3, 2)
    x = rng.normal(size=(4, 3))
    assert loss(p, Batch(x, predict(p, x))) == 0.0
    with pytest.raises(ValueError):
        Batch(np.zeros((0, 3)), np.zeros(0))


def test_zero_residual_zero_gradient():
    rng = np.random.default_rng(3)
    p = random_feasible(rng, 3, 4)
    x = rng.normal(size=(5, 3))
    g = backward(p, Batch(x, predict(p, x)))
    assert np.all(g.flat() == 0.0)


def test_bias_gradient():
    rng = np.random.default_rng(4)
    q, r = 3, 2
    p = NetworkParams(rng.uniform(-1e-9, 1e-9, r + 1), rng.uniform(-1e-9, 1e-9, (r, r + 1)),
                      rng.uniform(-1e-9, 1e-9, (r, q + 1)))
    p.theta[0] = 0.7
    b = Batch(rng.normal(size=(6, q)), rng.normal(size=6))
    g = backward(p, b)
    assert g.theta[0] == pytest.approx(2 * np.mean(predict(p, b.inputs) - b.targets), rel=1e-12)


def fd_error(p, b):
    return relative_error(backward(p, b).flat(), finite_difference_extended(p, b, step=1e-5))


def test_double_precision_differences_agree_loosely():
    rng = np.random.default_rng(11)
    p = random_feasible(rng, 6, 4)
    b = Batch(rng.uniform(-1, 1, (8, 6)), rng.uniform(-1, 1, 8))
    fd = finite_difference(lambda v: loss(p.with_flat(v), b), p.flat(), step=1e-5)
    assert relative_error(backward(p, b).flat(), fd, floor=1e-4) <= 1e-6


@pytest.mark.parametrize("k", range(20))
def test_gradient_against_finite_differences(k):
    rng = np.random.default_rng([k, 1])
    q, r = int(rng.integers(1, 11)), int(rng.integers(1, 6))
    p = random_feasible(rng, q, r)
    b = Batch(rng.uniform(-1, 1, (8, q)), rng.uniform(-1, 1, 8))
    assert fd_error(p, b) <= 1e-6


def test_adam_zero_gradient_keeps_params():
    p = init_params(NetworkShape(2, 2), 2, 2, 0)
    st0 = AdamState.fresh(p.flat().size)
    _, new = adam_step(st0, p, p.with_flat(np.zeros(p.flat().size)))
    assert np.array_equal(new.flat(), p.flat())


def single_param():
    # the smallest network with exactly one trainable entry is not available,
    # so every gradient component gets the same value and each moves alike
    return NetworkParams(np.zeros(2), np.zeros((1, 2)), np.zeros((1, 2)))


@pytest.mark.parametrize("g,expected", [(1.0, -0.001 / (1 + 1e-8)), (-2.0, 0.001 / (1 + 0.5e-8))])
def test_adam_first_step(g, expected):
    p = single_param()
    st0 = AdamState.fresh(p.flat().size)
    state, new = adam_step(st0, p, p.with_flat(np.full(p.flat().size, g)))
    assert state.p == 1
    assert np.allclose(new.flat() - p.flat(), expected, rtol=0, atol=1e-12)


def test_adam_reduces_loss():
    rng = np.random.default_rng(5)
    x = rng.uniform(-1, 1, (32, 3))
    y = 0.5 * np.tanh(x @ np.array([0.4, -0.3, 0.2]))
    b = Batch(x, y)
    p = init_params(NetworkShape(3, 4), 2, 2, 0)
    state = AdamState.fresh(p.flat().size, alpha=0.01)
    start = loss(p, b)
    for _ in range(300):
        state, p = adam_step(state, p, backward(p, b))
        p = project_constraints(p)
    assert loss(p, b) < 0.1 * start
    assert p.is_feasible()


def test_projection_examples():
    rng = np.random.default_rng(6)
    p = init_params(NetworkShape(3, 3), 2, 2, 1)
    assert np.array_equal(project_constraints(p).flat(), p.flat())
    theta = np.array([1.0, -2.0, 0.5, 0.5])  # L1 norm 4 = 2 v2
    big = NetworkParams(theta, p.nu, p.upsilon)
    assert np.array_equal(project_constraints(big).theta, theta / 2)
    wild = NetworkParams(rng.normal(size=4) * 5, rng.normal(size=(3, 4)) * 5, rng.normal(size=(3, 4)) * 5)
    once = project_constraints(wild)
    assert once.is_feasible()
    assert np.array_equal(project_constraints(once).flat(), once.flat())


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32), scale=st.floats(0.01, 50))
def test_projection_only_touches_violating_rows(seed, scale):
    rng = np.random.default_rng(seed)
    p = NetworkParams(rng.normal(size=3) * scale, rng.normal(size=(2, 3)) * scale,
                      rng.normal(size=(2, 4)) * scale)
    out = project_constraints(p)
    assert out.is_feasible()
    for a, b, budget in [(p.nu, out.nu, p.v2), (p.upsilon, out.upsilon, p.v1)]:
        ok = np.abs(a).sum(axis=1) <= budget
        assert np.array_equal(a[ok], b[ok])


def test_output_bounded_by_budget():
    rng = np.random.default_rng(7)
    for _ in range(50):
        p = random_feasible(rng, 5, 3, budget=2.5)
        y = predict(p, rng.normal(size=(20, 5)) * 10)
        assert np.all(np.abs(y) <= 2.5 + 1e-12)


def test_lipschitz_formula():
    assert lipschitz_bound(2, 1, 3, 2, 2) == 9216
    assert lipschitz_bound(0, 2, 4, 1.5, 2.0) == pytest.approx((3.0 * 2 * 3 * 4) ** 2)
    assert lipschitz_bound(3, 2, 5, 1, 1) == ((3 + 2) * 3 * 5) ** 2


def test_lipschitz_property_sampled():
    rng = np.random.default_rng(8)
    p_cov, gamma, r, v = 2, 3, 3, 2.0
    q = (p_cov + 1) * gamma
    bound = lipschitz_bound(r, p_cov, gamma, v, v)
    for _ in range(200):
        a = random_feasible(rng, q, r, v)
        b = random_feasible(rng, q, r, v)
        x = rng.uniform(-1, 1, (50, q))
        gap = np.mean((predict(a, x) - predict(b, x)) ** 2)
        assert gap <= bound * param_distance_sq(a, b)


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    p = random_feasible(rng, 4, 3, budget=2.2)
    p.to_csv(tmp_path / "p.csv")
    back = NetworkParams.from_csv(tmp_path / "p.csv")
    assert np.array_equal(back.flat(), p.flat())
    assert (back.v1, back.v2, back.shape) == (p.v1, p.v2, p.shape)


def test_csv_bad_header(tmp_path):
    (tmp_path / "bad.csv").write_text("layer,row,col,value\n")
    with pytest.raises(ValueError):
        NetworkParams.from_csv(tmp_path / "bad.csv")


@pytest.mark.parametrize("n,r", [(20, 3), (35, 3), (50, 4), (1, 1)])
def test_default_width(n, r):
    assert default_width(n) == r
