import numpy as np
import pytest
from scipy.linalg import expm

from rkdenoise.errors import DivergenceError
from rkdenoise.network import MlpParams, flatten, mlp_forward, unflatten, xavier_init
from rkdenoise.stepper import (
    EULER,
    KUTTA3,
    RK4,
    FlowModel,
    RkTableau,
    flow_steps,
    flow_steps_backprop,
    get_tableau,
    rk_step,
)


def _linear(A, tableau=RK4):
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    return FlowModel(MlpParams((n, n), [A], [np.zeros(n)]), tableau)


def _random_model(rng, n, hidden, tableau, scale=0.6):
    widths = (n, *hidden, n)
    weights = [scale * rng.normal(size=(b, a)) for a, b in zip(widths[:-1], widths[1:])]
    biases = [scale * rng.normal(size=b) for b in widths[1:]]
    return FlowModel(MlpParams(widths, weights, biases), tableau)


def test_tableau_validation():
    with pytest.raises(ValueError, match="lower triangular"):
        RkTableau([[0, 1], [0, 0]], [0.5, 0.5])
    with pytest.raises(ValueError, match="sum to 1"):
        RkTableau([[0, 0], [1, 0]], [0.5, 0.6])
    with pytest.raises(ValueError):
        get_tableau("dopri")
    assert get_tableau("kutta3") is KUTTA3


def test_zero_step_is_identity():
    model = _random_model(np.random.default_rng(0), 3, (8,), RK4)
    x = np.array([0.3, -1.0, 2.0])
    assert np.array_equal(rk_step(model, x, 0.0), x)


def test_rk4_on_linear_decay_is_taylor_of_exp():
    out = rk_step(_linear([[-1.0]]), np.array([1.0]), 0.1)
    assert out[0] == pytest.approx(0.90483750, abs=5e-9)
    h = 0.1
    assert out[0] == pytest.approx(1 - h + h**2 / 2 - h**3 / 6 + h**4 / 24, rel=1e-15)


def test_euler_tableau_is_forward_euler():
    model = _random_model(np.random.default_rng(1), 2, (5, 5), EULER)
    x = np.array([0.4, -0.2])
    np.testing.assert_allclose(rk_step(model, x, 0.05), x + 0.05 * mlp_forward(model.params, x),
                               rtol=1e-15)


def test_kutta3_stage_structure():
    # the 3-stage scheme on x' = x gives 1 + h + h^2/2 + h^3/6
    h = 0.2
    out = rk_step(_linear([[1.0]], KUTTA3), np.array([1.0]), h)
    assert out[0] == pytest.approx(1 + h + h**2 / 2 + h**3 / 6, rel=1e-15)


@pytest.mark.parametrize("tableau, order", [(EULER, 1), (KUTTA3, 3), (RK4, 4)])
def test_local_error_order(tableau, order):
    A = np.array([[-0.3, 1.0], [-1.0, -0.2]])
    model = _linear(A, tableau)
    x = np.array([1.0, 0.5])
    errs = [np.linalg.norm(rk_step(model, x, h) - expm(h * A) @ x) for h in (0.04, 0.02)]
    assert np.log2(errs[0] / errs[1]) == pytest.approx(order + 1, abs=0.15)


def test_flow_steps_zero_is_identity():
    model = _random_model(np.random.default_rng(2), 2, (4,), RK4)
    x = np.array([1.0, 2.0])
    assert np.array_equal(flow_steps(model, x, [0.1, 0.1], 0), x)


def test_flow_steps_composition_law():
    model = _random_model(np.random.default_rng(3), 3, (6, 6), RK4)
    x = np.array([0.1, 0.2, -0.3])
    expected = x
    for _ in range(3):
        expected = rk_step(model, expected, 0.01)
    np.testing.assert_array_equal(flow_steps(model, x, np.full(3, 0.01), 3), expected)


def test_backward_steps_use_preceding_gaps_latest_first():
    model = _random_model(np.random.default_rng(4), 2, (5,), RK4)
    x = np.array([0.5, -0.5])
    gaps = np.array([0.01, 0.02, 0.03])
    expected = rk_step(model, rk_step(model, x, -0.03), -0.02)
    np.testing.assert_array_equal(flow_steps(model, x, gaps, -2), expected)


def test_forward_then_backward_contracting_linear():
    model = _linear([[-1.0, 0.3], [-0.3, -1.0]])
    x = np.array([1.0, -2.0])
    for dt in (0.02, 0.01):
        fwd = flow_steps(model, x, [dt], 1)
        back = flow_steps(model, fwd, [dt], -1)
        assert np.linalg.norm(back - x) < 10 * dt**5 * np.linalg.norm(x)


def test_inverse_consistency_random_field():
    rng = np.random.default_rng(5)
    model = _random_model(rng, 2, (16, 16), RK4, scale=0.5)
    gaps = np.full(10, 0.01)
    for _ in range(20):
        x = rng.normal(size=2)
        there = flow_steps(model, x, gaps, 10)
        back = flow_steps(model, there, gaps, -10)
        assert np.linalg.norm(back - x) / np.linalg.norm(x) < 1e-6


def test_too_many_steps_rejected():
    model = _linear([[0.0]])
    with pytest.raises(ValueError):
        flow_steps(model, [1.0], [0.1], 2)


def test_divergence_reports_step():
    model = FlowModel(MlpParams((1, 1), [np.array([[800.0]])], [np.zeros(1)]), RK4)
    with pytest.raises(DivergenceError) as err:
        flow_steps(model, [1.0], np.full(40, 1.0), 40)
    assert err.value.step is not None and err.value.step >= 1


def _fd_flow(model, x, gaps, i, u, h=1e-6):
    f = lambda xx, p: float(u @ flow_steps(FlowModel(p, model.tableau), xx, gaps, i))  # noqa: E731
    p = model.params
    flat = flatten(p)
    gx = np.array([(f(x + h * e, p) - f(x - h * e, p)) / (2 * h) for e in np.eye(x.size)])
    gp = np.empty(flat.size)
    for k in range(flat.size):
        e = np.zeros(flat.size)
        e[k] = h
        gp[k] = (f(x, unflatten(p.widths, flat + e)) - f(x, unflatten(p.widths, flat - e))) / (2 * h)
    return gx, gp


def test_flow_backprop_matches_finite_differences_100_instances():
    rng = np.random.default_rng(6)
    worst = 0.0
    for k in range(100):
        tableau = (RK4, KUTTA3)[k % 2]
        n = int(rng.integers(1, 4))
        model = _random_model(rng, n, (int(rng.integers(2, 7)),), tableau)
        i = int(rng.choice([-3, -2, -1, 1, 2, 3]))
        gaps = rng.uniform(0.01, 0.1, size=3)
        x, u = rng.normal(size=n), rng.normal(size=n)
        gx, gp = flow_steps_backprop(model, x, gaps, i, u)
        fx, fp = _fd_flow(model, x, gaps, i, u)
        exact, fd = np.concatenate([gx, gp]), np.concatenate([fx, fp])
        worst = max(worst, np.linalg.norm(exact - fd) / np.linalg.norm(fd))
    assert worst < 1e-6


def test_flow_backprop_zero_steps():
    model = _random_model(np.random.default_rng(7), 2, (4,), RK4)
    u = np.array([0.7, -0.1])
    gx, gp = flow_steps_backprop(model, np.array([1.0, 1.0]), [0.1], 0, u)
    assert np.array_equal(gx, u) and not np.any(gp)


@pytest.mark.parametrize("i", [1, 2, 3, -2])
def test_flow_backprop_linear_jacobian_power(i):
    A = np.array([[-0.5, 2.0], [-1.0, 0.1]])
    h = 0.05
    Ah = h * A
    step = np.eye(2) + Ah + Ah @ Ah / 2 + Ah @ Ah @ Ah / 6 + Ah @ Ah @ Ah @ Ah / 24
    if i < 0:
        Ah = -Ah
        step = np.eye(2) + Ah + Ah @ Ah / 2 + Ah @ Ah @ Ah / 6 + Ah @ Ah @ Ah @ Ah / 24
    u = np.array([1.0, -3.0])
    gx, _ = flow_steps_backprop(_linear(A), np.array([0.2, 0.4]), np.full(3, h), i, u)
    np.testing.assert_allclose(gx, np.linalg.matrix_power(step.T, abs(i)) @ u, rtol=1e-13)


def test_batched_gaps_per_column():
    model = _random_model(np.random.default_rng(8), 2, (5,), RK4)
    X = np.array([[0.1, 0.5, -0.4], [0.2, -0.3, 0.9]])
    gaps = np.array([[0.01, 0.02, 0.03], [0.02, 0.01, 0.05]])
    out = flow_steps(model, X, gaps, 2)
    for j in range(3):
        np.testing.assert_allclose(out[:, j], flow_steps(model, X[:, j], gaps[:, j], 2), rtol=1e-14)


def test_xavier_model_steps_finite():
    model = FlowModel(xavier_init((3, 64, 64, 64, 3), 0), RK4)
    assert np.all(np.isfinite(flow_steps(model, np.array([5.0, 5.0, 25.0]), np.full(3, 0.01), 3)))
