import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkdenoise.corrupt import (
    NoisyDataset,
    add_gaussian_noise,
    add_student_t_noise,
    moving_average,
    noise_sigma,
    smooth_initial_noise,
)
from rkdenoise.integrate import Trajectory, rk4_simulate
from rkdenoise.metrics import noise_moments
from rkdenoise.systems import cubic_oscillator_field, lorenz_field


@pytest.fixture(scope="module")
def cubic():
    return rk4_simulate(cubic_oscillator_field, [2.0, 0.0], np.linspace(0, 25, 2500))


@pytest.fixture(scope="module")
def lorenz():
    return rk4_simulate(lorenz_field, [5.0, 5.0, 25.0], np.linspace(0, 25, 2500))


def test_noise_sigma_zero_percent():
    assert np.array_equal(noise_sigma(np.random.default_rng(0).normal(size=(3, 10)), 0), np.zeros(3))


def test_noise_sigma_is_percent_of_sample_std():
    row = np.tile([-1.0, 1.0], 5)
    sigma = noise_sigma(row[None, :], 100)
    assert sigma[0] == pytest.approx(row.std(ddof=1), rel=1e-15)


def test_noise_sigma_constant_row_names_coordinate():
    data = np.vstack([np.arange(5.0), np.ones(5)])
    with pytest.raises(ValueError, match="coordinate 1"):
        noise_sigma(data, 5)


def test_gaussian_scale_on_cubic_long_run():
    X = rk4_simulate(cubic_oscillator_field, [2.0, 0.0], np.linspace(0, 25, 100_000))
    d = add_gaussian_noise(X, 10, seed=2)
    ratio = d.true_noise.std(axis=1) / X.states.std(axis=1, ddof=1)
    assert np.all((0.095 <= ratio) & (ratio <= 0.105))


def test_zero_percent_is_exact(cubic):
    d = add_gaussian_noise(cubic, 0, seed=1)
    assert np.array_equal(d.observations, cubic.states)
    assert not np.any(d.true_noise)
    t = add_student_t_noise(cubic, 0, 10, seed=1)
    assert not np.any(t.true_noise)


def test_observations_equal_truth_plus_noise(lorenz):
    d = add_gaussian_noise(lorenz, 10, seed=5)
    assert np.array_equal(d.observations, d.truth.states + d.true_noise)
    d.validate()


def test_validate_catches_tampering(cubic):
    d = add_gaussian_noise(cubic, 5, seed=0)
    Y = d.observations.copy()
    Y[1, 17] += 1e-9
    bad = NoisyDataset(Y, d.times, d.truth, d.true_noise)
    with pytest.raises(ValueError, match="column 17"):
        bad.validate()


def test_same_seed_same_noise(cubic):
    a = add_gaussian_noise(cubic, 10, seed=11)
    b = add_gaussian_noise(cubic, 10, seed=11)
    c = add_gaussian_noise(cubic, 10, seed=12)
    assert np.array_equal(a.true_noise, b.true_noise)
    assert not np.array_equal(a.true_noise, c.true_noise)


def test_doubling_percent_doubles_noise(cubic):
    a = add_gaussian_noise(cubic, 5, seed=3)
    b = add_gaussian_noise(cubic, 10, seed=3)
    np.testing.assert_allclose(b.true_noise, 2 * a.true_noise, rtol=1e-14)


def test_lorenz_x_variance_near_reference(lorenz):
    # reference empirical variance of the injected x-noise at 10%
    var = noise_moments(add_gaussian_noise(lorenz, 10, seed=0).true_noise[0])["var"]
    assert abs(var - 0.5852) / 0.5852 < 0.06


def test_noise_is_column_independent():
    X = Trajectory(np.arange(100_000.0), np.sin(np.arange(100_000.0))[None, :])
    n = add_gaussian_noise(X, 10, seed=4).true_noise[0]
    lag1 = np.corrcoef(n[:-1], n[1:])[0, 1]
    assert abs(lag1) < 0.02


def test_student_t_rejects_small_dof(cubic):
    with pytest.raises(ValueError):
        add_student_t_noise(cubic, 10, 2, seed=0)


def test_student_t_large_dof_is_gaussian_like():
    X = Trajectory(np.arange(1_000_000.0), np.sin(np.arange(1_000_000.0))[None, :])
    n = add_student_t_noise(X, 10, 10**6, seed=7).true_noise[0]
    assert abs(noise_moments(n)["kurt"]) < 0.05


def test_student_t_is_scaled_standard_t(cubic):
    d = add_student_t_noise(cubic, 10, 10, seed=9)
    scale = noise_sigma(cubic.states, 10)
    expected = scale[:, None] * np.random.default_rng(9).standard_t(10, size=cubic.states.shape)
    assert np.array_equal(d.true_noise, expected)


def test_smoothing_window_one_is_zero():
    Y = np.random.default_rng(0).normal(size=(2, 30))
    assert np.array_equal(smooth_initial_noise(Y, 1), np.zeros_like(Y))


@pytest.mark.parametrize("window", [3, 5, 9])
def test_smoothing_constant_signal(window):
    assert np.array_equal(smooth_initial_noise(np.full((2, 40), 3.25), window), np.zeros((2, 40)))


@pytest.mark.parametrize("window", [3, 5, 9])
def test_smoothing_linear_ramp_interior_exact(window):
    t = np.linspace(0, 1, 50)
    Y = np.vstack([2 * t - 1, -3 * t])
    N0 = smooth_initial_noise(Y, window)
    np.testing.assert_allclose(N0, 0.0, atol=1e-14)


def test_moving_average_shrinks_at_boundary():
    y = np.array([[1.0, 2.0, 4.0, 8.0, 16.0]])
    out = moving_average(y, 5)
    np.testing.assert_allclose(out, [[1.0, 7 / 3, 31 / 5, 28 / 3, 16.0]])


@pytest.mark.parametrize("window", [0, 2, 7])
def test_moving_average_rejects_bad_window(window):
    with pytest.raises(ValueError):
        moving_average(np.zeros((1, 5)), window)


@settings(deadline=None, max_examples=40)
@given(st.integers(1, 6), st.integers(8, 60), st.integers(0, 2**31 - 1))
def test_smoothing_residual_plus_average_restores(half, m, seed):
    window = min(2 * half + 1, m - (1 - m % 2))
    Y = np.random.default_rng(seed).normal(size=(2, m))
    np.testing.assert_allclose(smooth_initial_noise(Y, window) + moving_average(Y, window), Y,
                               atol=1e-12)
