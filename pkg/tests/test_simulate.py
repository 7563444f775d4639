import numpy as np
import pytest
from scipy.integrate import solve_ivp

from swingsym import example_path, load_network
from swingsym.errors import DivergenceError, NumericalError
from swingsym.linearization import linearize
from swingsym.simulate import (
    default_horizon,
    flow_series,
    integrate_matrix,
    integrate_nonlinear,
    max_abs_flow_on_trajectory,
    rk4,
    signed_abs_max,
    trajectory_csv,
)


def swing_rhs(net):
    d = net.derived()
    a, gamma, p = np.asarray(d.A), np.asarray(d.gamma), np.asarray(d.p)
    n = net.n

    def rhs(_, y):
        x, v = y[:n], y[n:]
        diff = x[None, :] - x[:, None]
        return np.concatenate([v, -gamma * v + p + np.sum(a * np.sin(diff), axis=1)])

    return rhs


def test_nonlinear_rk4_matches_scipy():
    net = load_network(example_path("bottleneck7"))
    traj = integrate_nonlinear(net, horizon=10.0, step=1e-3, stride=500)
    sol = solve_ivp(swing_rhs(net), (0, 10), np.zeros(14), t_eval=traj.times,
                    rtol=1e-11, atol=1e-12, method="DOP853")
    np.testing.assert_allclose(traj.theta, sol.y[:7], atol=1e-9)
    np.testing.assert_allclose(traj.thetadot, sol.y[7:], atol=1e-9)


def test_nonlinear_settles_to_fixed_point():
    net = load_network(example_path("star7"))
    lin = linearize(net, "solve")
    traj = integrate_nonlinear(net, horizon=default_horizon(lin.gamma))
    final = traj.theta[:, -1]
    np.testing.assert_allclose(final - final[0], lin.theta_star - lin.theta_star[0], atol=1e-6)


def test_rk4_fourth_order_on_oscillator():
    exact = np.cos(2.0)
    errs = []
    for h in (0.1, 0.05):
        traj = rk4(lambda x, v: -x, [1.0], [0.0], horizon=2.0, step=h)
        errs.append(abs(traj.theta[0, -1] - exact))
    assert 12 < errs[0] / errs[1] < 20


def test_divergence_and_bad_arguments():
    with pytest.raises(DivergenceError):
        integrate_matrix(np.array([[1.0]]), np.array([0.0]), np.array([0.0]),
                         theta0=[1.0], horizon=40.0, step=0.01)
    with pytest.raises(NumericalError):
        rk4(lambda x, v: x, [0.0], [0.0], horizon=1.0, step=-1)
    with pytest.raises(NumericalError):
        rk4(lambda x, v: x, [0.0], [0.0], horizon=1.0, stride=0)


def test_flows_and_maxima():
    net = load_network(example_path("bottleneck7"))
    traj = integrate_nonlinear(net, horizon=5.0, stride=10)
    lin = flow_series(traj, net, 0, 1, "linear")
    sin = flow_series(traj, net, 0, 1, "nonlinear")
    np.testing.assert_allclose(lin, traj.theta[1] - traj.theta[0])
    np.testing.assert_allclose(sin, np.sin(traj.theta[1] - traj.theta[0]))
    t, v = max_abs_flow_on_trajectory(traj, net, 0, 1, "linear")
    assert abs(v) == pytest.approx(np.max(np.abs(lin)))
    assert signed_abs_max([0, 1, 2], [0.5, -2.0, 1.0]) == (1.0, -2.0)


def test_csv_export():
    net = load_network(example_path("star7"))
    traj = integrate_nonlinear(net, horizon=0.01, step=1e-3, stride=5)
    lines = trajectory_csv(traj, net.ids).splitlines()
    assert lines[0].split(",")[:3] == ["time", "theta_1", "theta_2"]
    assert len(lines) == traj.times.size + 1
