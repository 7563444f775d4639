"""Fixed-step RK4 integration of the nonlinear and linear swing equations."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DivergenceError, NumericalError
from .linearization import LinearizedSystem, linear_flow, nonlinear_flow
from .network import GridNetwork

DEFAULT_STEP = 1e-3
BLOWUP = 1e8


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples of θ and θ' with shape (n, len(times))."""

    times: np.ndarray
    theta: np.ndarray
    thetadot: np.ndarray

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    def at(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        return self.theta[:, k], self.thetadot[:, k]


def default_horizon(gamma) -> float:
    return 40.0 / float(np.min(gamma))


def rk4(
    accel: Callable[[np.ndarray, np.ndarray], np.ndarray],
    theta0,
    thetadot0,
    horizon: float,
    step: float = DEFAULT_STEP,
    stride: int = 1,
) -> Trajectory:
    """Classic RK4 for θ'' = accel(θ, θ'), keeping every ``stride``-th sample."""
    if not step > 0 or not horizon > 0:
        raise NumericalError("step and horizon must be positive")
    if stride < 1:
        raise NumericalError("stride must be >= 1")
    x = np.array(theta0, dtype=float)
    v = np.array(thetadot0, dtype=float)
    n_steps = int(round(horizon / step))
    if n_steps < 1:
        raise NumericalError("horizon is shorter than one step")
    keep = n_steps // stride + 1
    times = np.empty(keep)
    xs = np.empty((x.size, keep))
    vs = np.empty((x.size, keep))
    times[0], xs[:, 0], vs[:, 0] = 0.0, x, v
    h, half = step, 0.5 * step
    slot = 1
    for k in range(1, n_steps + 1):
        a1 = accel(x, v)
        x2, v2 = x + half * v, v + half * a1
        a2 = accel(x2, v2)
        x3, v3 = x + half * v2, v + half * a2
        a3 = accel(x3, v3)
        x4, v4 = x + h * v3, v + h * a3
        a4 = accel(x4, v4)
        x = x + (h / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4)
        v = v + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        if k % stride == 0:
            if not (np.all(np.isfinite(x)) and np.max(np.abs(x)) < BLOWUP):
                raise DivergenceError(f"state diverged at t={k * h:.4g}")
            times[slot], xs[:, slot], vs[:, slot] = k * h, x, v
            slot += 1
    if not np.all(np.isfinite(x)):
        raise DivergenceError("state diverged")
    return Trajectory(times[:slot], xs[:, :slot], vs[:, :slot])


def _initial(n, theta0, thetadot0):
    t0 = np.zeros(n) if theta0 is None else np.asarray(theta0, dtype=float)
    v0 = np.zeros(n) if thetadot0 is None else np.asarray(thetadot0, dtype=float)
    if t0.shape != (n,) or v0.shape != (n,):
        raise NumericalError(f"initial state must have length {n}")
    return t0, v0


def integrate_nonlinear(
    net: GridNetwork,
    theta0=None,
    thetadot0=None,
    horizon: float | None = None,
    step: float = DEFAULT_STEP,
    stride: int = 1,
) -> Trajectory:
    d = net.derived()
    A, p, gamma = np.asarray(d.A), np.asarray(d.p), np.asarray(d.gamma)

    def accel(x, v):
        s, c = np.sin(x), np.cos(x)
        return -gamma * v + p + c * (A @ s) - s * (A @ c)

    x0, v0 = _initial(net.n, theta0, thetadot0)
    if horizon is None:
        horizon = default_horizon(gamma)
    return rk4(accel, x0, v0, horizon, step, stride)


def integrate_matrix(L, gamma, p, theta0=None, thetadot0=None, horizon=None,
                     step: float = DEFAULT_STEP, stride: int = 1) -> Trajectory:
    """θ'' = -diag(γ) θ' + L θ + p for an arbitrary matrix L."""
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (n,))
    p = np.asarray(p, dtype=float)

    def accel(x, v):
        return -gamma * v + L @ x + p

    x0, v0 = _initial(n, theta0, thetadot0)
    if horizon is None:
        horizon = default_horizon(gamma)
    return rk4(accel, x0, v0, horizon, step, stride)


def integrate_linear(
    sys: LinearizedSystem,
    theta0=None,
    thetadot0=None,
    horizon: float | None = None,
    step: float = DEFAULT_STEP,
    stride: int = 1,
) -> Trajectory:
    return integrate_matrix(sys.L, sys.gamma, sys.p, theta0, thetadot0, horizon, step, stride)


def flow_series(traj: Trajectory, net: GridNetwork, i: int, j: int, kind: str = "linear"):
    if kind == "linear":
        return linear_flow(net, traj.theta, i, j)
    if kind == "nonlinear":
        return nonlinear_flow(net, traj.theta, i, j)
    raise ValueError(f"unknown flow kind {kind!r}")


def signed_abs_max(times, values) -> tuple[float, float]:
    """(t, v) at the sample of largest |v|; the earliest one on ties."""
    values = np.asarray(values)
    k = int(np.argmax(np.abs(values)))
    return float(times[k]), float(values[k])


def max_abs_flow_on_trajectory(
    traj: Trajectory, net: GridNetwork, i: int, j: int, kind: str = "linear"
) -> tuple[float, float]:
    return signed_abs_max(traj.times, flow_series(traj, net, i, j, kind))


def max_abs_on_trajectory(traj: Trajectory, row) -> tuple[float, float]:
    """Largest |row · θ(t)| over the samples."""
    return signed_abs_max(traj.times, np.asarray(row, dtype=float) @ traj.theta)


def trajectory_csv(traj: Trajectory, ids) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["time"] + [f"theta_{i}" for i in ids] + [f"thetadot_{i}" for i in ids])
    for k, t in enumerate(traj.times):
        writer.writerow([repr(float(t))] + [repr(float(x)) for x in traj.theta[:, k]]
                        + [repr(float(x)) for x in traj.thetadot[:, k]])
    return buf.getvalue()
