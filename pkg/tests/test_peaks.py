import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from generators import random_combination
from swingsym import example_path, load_network
from swingsym.errors import NumericalError
from swingsym.linearization import linearize
from swingsym.modal import decompose, modal_flows
from swingsym.peaks import (
    ModeCombination,
    combination_for_line,
    cumulative_guess,
    dense_scan_max,
    find_first_peak,
    max_abs_value,
    settling_time,
    stationarity_residual,
    taylor_initial_guess,
)


def brute_first_extremum(comb, horizon, step=1e-4):
    """First sign change of F' on a fine grid, refined by linear interpolation."""
    t = np.arange(1, int(horizon / step) + 1) * step
    d = comb.rate(t)
    k = np.flatnonzero(np.sign(d[1:]) != np.sign(d[:-1]))
    if k.size == 0:
        return None
    k = k[0]
    return t[k] - d[k] * step / (d[k + 1] - d[k])


def test_single_mode_peak_is_half_period():
    comb = ModeCombination([2.0], [0.5], [1.5], 0.3)
    res = find_first_peak(comb)
    sigma = np.sqrt(1.5**2 - 0.3**2)
    assert res.found
    assert res.time == pytest.approx(np.pi / sigma, rel=1e-12)
    assert res.value == pytest.approx(float(comb.value(np.pi / sigma)), rel=1e-12)


def test_residual_is_proportional_to_rate():
    rng = np.random.default_rng(4)
    comb = random_combination(rng)
    t = np.linspace(0.01, 10, 50)
    ratio = comb.rate(t) / stationarity_residual(comb, t)
    np.testing.assert_allclose(ratio, np.exp(-comb.decay * t), rtol=1e-9)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_first_peak_is_the_first_stationary_point(seed):
    comb = random_combination(np.random.default_rng(seed))
    res = find_first_peak(comb)
    horizon = 2 * np.pi / float(np.min(comb.sigma))
    ref = brute_first_extremum(comb, horizon)
    if ref is None:
        assert not res.found
        return
    assert res.found
    assert abs(res.time - ref) <= 2e-4
    assert abs(float(comb.rate(res.time))) <= 1e-8 * (1 + np.sum(np.abs(comb.weights)))


def test_overdamped_and_zero_omega_cases():
    mono = ModeCombination([1.0], [1.0], [0.5], 1.0)
    assert mono.kinds == ("overdamped",)
    res = find_first_peak(mono)
    assert not res.found
    assert max_abs_value(mono) == (pytest.approx(4.0), "steady-state")
    mixed = ModeCombination([1.0, -2.0], [1.0, 1.0], [0.6, 3.0], 0.8)
    res = find_first_peak(mixed)
    ref = brute_first_extremum(mixed, 50.0)
    assert res.found and abs(res.time - ref) < 2e-4
    with pytest.raises(ValueError):
        ModeCombination([1.0], [1.0], [0.0], 1.0)


def test_guesses():
    comb = ModeCombination([1.0, 1.0], [1.0, 1.0], [1.0, 2.0], 0.5)
    g = taylor_initial_guess(comb)
    w = comb.weights
    assert g == pytest.approx(np.sqrt(6 * w.sum() / (w * comb.sigma_sq).sum()))
    assert taylor_initial_guess(ModeCombination([1.0, -1.0], [1.0, 1.0], [1.0, 2.0], 0.5)) is None
    assert cumulative_guess(comb, [3.0, 1.0, 2.0], [1.0, -5.0, 1.0]) == 1.0
    assert cumulative_guess(comb, [], []) is None


def test_bottleneck_peaks_agree_with_dense_scan_on_first_extremum():
    net = load_network(example_path("bottleneck7"))
    basis = decompose(linearize(net, "zero"))
    for i, j in net.lines():
        comb = combination_for_line(basis, net, i, j)
        res = find_first_peak(comb)
        t = np.linspace(0, 20, 5)
        np.testing.assert_allclose(comb.value(t), modal_flows(basis, net, i, j, t), atol=1e-13)
        if res.found:
            ref = brute_first_extremum(comb, 40.0)
            assert abs(res.time - ref) < 2e-4


def test_scan_and_settling():
    comb = ModeCombination([1.0], [1.0], [2.0], 0.5)
    t, v = dense_scan_max(comb, step=1e-3)
    tp = np.pi / np.sqrt(4 - 0.25)
    assert abs(t - tp) <= 1e-3
    assert settling_time(comb) == pytest.approx(8.0)
    assert settling_time(ModeCombination([], [], [], 1.0)) == 0.0
    with pytest.raises(NumericalError):
        dense_scan_max(comb, step=0.0)


def test_bottleneck_max_bounds_linear_trajectory():
    from swingsym.simulate import flow_series, integrate_linear

    net = load_network(example_path("bottleneck7"))
    lin = linearize(net, "zero")
    basis = decompose(lin)
    traj = integrate_linear(lin, horizon=40.0 / 1.5, step=1e-3)
    for i, j in net.lines():
        value, _ = max_abs_value(combination_for_line(basis, net, i, j))
        flow = flow_series(traj, net, i, j, "linear")
        assert np.max(np.abs(flow)) <= abs(value) + 1e-4


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_residual_changes_sign_across_peak(seed):
    comb = random_combination(np.random.default_rng(seed))
    res = find_first_peak(comb)
    if not res.found:
        return
    s = np.sqrt(np.abs(comb.sigma_sq))
    tol = 1e-12 * float(np.sum(np.abs(comb.weights) / s))
    assert abs(float(stationarity_residual(comb, res.time))) <= 10 * tol
    h = 1e-6 * res.time
    before = float(stationarity_residual(comb, res.time - h))
    after = float(stationarity_residual(comb, res.time + h))
    assert before * after < 0


def test_single_mode_reproduces_peak_formula():
    omega, zeta, c, q = 1.3, 0.15, -0.7, 0.9
    comb = ModeCombination([c], [q], [omega], zeta * omega)
    res = find_first_peak(comb)
    r = np.sqrt(1 - zeta**2)
    assert res.time == pytest.approx(np.pi / (omega * r), abs=1e-12)
    expected = c * q / omega**2 * (1 + np.exp(-np.pi * zeta / r))
    assert res.value == pytest.approx(expected, abs=1e-12)


def test_cumulative_guess_follows_dominant_later_mode():
    # the fast mode peaks first but is small; the slow mode, opposite in sign, dominates
    comb = ModeCombination([0.05, -1.0], [1.0, 1.0], [3.0, 1.0], 0.2)
    guess = cumulative_guess(comb)
    slow = np.pi / np.sqrt(1.0 - 0.04)
    assert guess == pytest.approx(slow)
    t = np.arange(1, 200000) * 1e-4
    v = comb.value(t[t < 1.5 * slow])
    assert abs(t[np.argmax(np.abs(v))] - slow) < 0.05
    same = ModeCombination([1.0, 2.0], [1.0, 1.0], [1.0, 1.0], 0.2)
    assert cumulative_guess(same) == pytest.approx(np.pi / np.sqrt(1 - 0.04))


def test_zero_forcing_gives_zero_steady_state():
    comb = ModeCombination([1.0, 2.0], [0.0, 0.0], [1.0, 2.0], 0.3)
    assert max_abs_value(comb) == (0.0, "steady-state")
