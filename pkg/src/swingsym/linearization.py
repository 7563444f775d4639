"""Fixed point of the nonlinear swing equation and its linearization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NetworkFormatError, NumericalError
from .network import GridNetwork, connected_components, is_balanced

MAX_NEWTON_ITER = 100
MAX_HALVINGS = 30


@dataclass(frozen=True, eq=False)
class LinearizedSystem:
    """Linear swing dynamics  θ'' = -Γ θ' + L θ + p  about ``theta_star``.

    ``L = diag(d_scale) @ l_bar`` with ``l_bar`` symmetric. For ordinary
    (undirected) networks ``d_scale`` is J; nodes of multiplicity m get
    ``J/m`` so that the symmetric factor survives on quotient networks.
    """

    theta_star: np.ndarray
    L: np.ndarray
    p: np.ndarray
    gamma: np.ndarray
    d_scale: np.ndarray
    l_bar: np.ndarray
    j_scale: np.ndarray
    multiplicity: np.ndarray

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @property
    def homogeneous(self) -> bool:
        return bool(np.ptp(self.gamma) <= 1e-12 * max(1.0, float(np.max(self.gamma))))


def _cos_weights(net: GridNetwork, theta: np.ndarray) -> np.ndarray:
    return net.coupling * np.cos(theta[None, :] - theta[:, None])


def power_residual(net: GridNetwork, theta: np.ndarray) -> np.ndarray:
    """p_i + Σ_j A_ij sin(θ_j - θ_i); zero at a fixed point."""
    d = net.derived()
    return d.p + np.sum(d.A * np.sin(theta[None, :] - theta[:, None]), axis=1)


def _jacobian(net: GridNetwork, theta: np.ndarray) -> np.ndarray:
    c = net.derived().A * np.cos(theta[None, :] - theta[:, None])
    return c - np.diag(c.sum(axis=1))


def solve_fixed_point(
    net: GridNetwork, initial_guess=None, tol: float = 1e-10
) -> np.ndarray:
    """Damped Newton on the reduced system with node 0 pinned at zero."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if len(connected_components(net)) > 1:
        raise NumericalError("network is not connected; fixed point is not unique")
    if not is_balanced(net):
        raise NumericalError("network is not balanced; no fixed point exists")

    n = net.n
    theta = np.zeros(n) if initial_guess is None else np.array(initial_guess, dtype=float)
    if theta.shape != (n,):
        raise NetworkFormatError(f"initial guess must have length {n}")
    theta = theta - theta[0]
    if initial_guess is None and not np.any(net.derived().p):
        return np.zeros(n)

    res = power_residual(net, theta)
    norm = np.max(np.abs(res))
    for _ in range(MAX_NEWTON_ITER):
        if norm <= tol:
            return theta
        jac = _jacobian(net, theta)[1:, 1:]
        try:
            step = np.linalg.solve(jac, -res[1:])
        except np.linalg.LinAlgError:
            raise NumericalError("singular Jacobian at the current iterate") from None
        if not np.all(np.isfinite(step)):
            raise NumericalError("singular Jacobian at the current iterate")
        alpha = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = theta.copy()
            trial[1:] += alpha * step
            trial_res = power_residual(net, trial)
            trial_norm = np.max(np.abs(trial_res))
            if trial_norm < norm:
                break
            alpha *= 0.5
        else:
            raise NumericalError(
                "Newton step could not reduce the residual; "
                "operating point may be outside the small-angle regime"
            )
        theta, res, norm = trial, trial_res, trial_norm
    if norm <= tol:
        return theta
    raise NumericalError(
        f"fixed point did not converge in {MAX_NEWTON_ITER} iterations (residual {norm:.3e})"
    )


def build_linearized(net: GridNetwork, theta_star) -> LinearizedSystem:
    theta_star = np.asarray(theta_star, dtype=float)
    if theta_star.shape != (net.n,):
        raise NetworkFormatError(f"theta_star must have length {net.n}")
    d = net.derived()
    c = _cos_weights(net, theta_star)
    lap = c - np.diag(c.sum(axis=1))
    m = net.multiplicity
    l_bar = m[:, None] * lap
    if not net.directed:
        l_bar = 0.5 * (l_bar + l_bar.T)
    d_scale = d.j_scale / m
    L = d_scale[:, None] * l_bar
    return LinearizedSystem(
        theta_star=theta_star,
        L=L,
        p=np.array(d.p),
        gamma=np.array(d.gamma),
        d_scale=d_scale,
        l_bar=l_bar,
        j_scale=np.array(d.j_scale),
        multiplicity=np.array(m),
    )


def linearize(net: GridNetwork, theta_star: str | np.ndarray = "solve", tol: float = 1e-10):
    """Convenience: pick the operating point ("solve", "zero" or a vector) and linearize."""
    if isinstance(theta_star, str):
        if theta_star == "zero":
            ts = np.zeros(net.n)
        elif theta_star == "solve":
            ts = solve_fixed_point(net, tol=tol)
        else:
            raise ValueError(f"unknown operating point mode {theta_star!r}")
    else:
        ts = np.asarray(theta_star, dtype=float)
    return build_linearized(net, ts)


def linear_flow(net: GridNetwork, theta, i: int, j: int):
    """Ã_ij (θ_j - θ_i); ``theta`` may carry a trailing time axis."""
    w = net.flow_weight(i, j)
    theta = np.asarray(theta)
    return w * (theta[j] - theta[i])


def nonlinear_flow(net: GridNetwork, theta, i: int, j: int):
    """Ã_ij sin(θ_j - θ_i)."""
    w = net.flow_weight(i, j)
    theta = np.asarray(theta)
    return w * np.sin(theta[j] - theta[i])
