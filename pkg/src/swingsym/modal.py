"""Modal decomposition of the linear swing equation and closed-form mode responses.

Each mode obeys  η'' = -γ η' + λ η + q.  With ω² = -λ and ζ = γ/(2ω) the
forced (rest-start) responses are the textbook step responses of a
second-order system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .jacobi import jacobi_eigh
from .linearization import LinearizedSystem
from .network import GridNetwork

ZERO = "zero"
UNDERDAMPED = "underdamped"
CRITICAL = "critically-damped"
OVERDAMPED = "overdamped"

CTOL = 1e-9
DEGENERACY_TOL = 1e-8
UNSTABLE_TOL = 1e-8


# ---------------------------------------------------------------- spectra


def orientation_signs(v: np.ndarray) -> np.ndarray:
    """Per-column sign that makes the largest-magnitude entry positive.

    Near-ties are broken by the lowest index.
    """
    signs = np.ones(v.shape[1])
    for k in range(v.shape[1]):
        mag = np.abs(v[:, k])
        first = int(np.flatnonzero(mag >= mag.max() * (1 - 1e-9))[0])
        if v[first, k] < 0:
            signs[k] = -1.0
    return signs


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigen-decomposition of M = diag(d) @ S with S symmetric and d > 0.

    ``W`` holds orthonormal eigenvectors of D^½ S D^½; right eigenvectors of M
    are V = D^½ W with unit-norm columns and V⁻¹ = diag(c) Wᵀ D^-½.
    """

    lam: np.ndarray
    W: np.ndarray
    V: np.ndarray
    Vinv: np.ndarray
    d: np.ndarray

    def rotated(self, W: np.ndarray) -> "Spectrum":
        return _from_w(self.lam, W, self.d)


def _from_w(lam, W, d) -> Spectrum:
    sq = np.sqrt(d)
    V = sq[:, None] * W
    c = np.linalg.norm(V, axis=0)
    V = V / c
    Vinv = (c[:, None] * W.T) / sq[None, :]
    return Spectrum(lam=np.asarray(lam, dtype=float), W=W, V=V, Vinv=Vinv, d=np.asarray(d))


def symmetrized_eig(d, s) -> Spectrum:
    """Real spectrum of diag(d) @ s via the symmetric similarity transform."""
    d = np.asarray(d, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(d <= 0):
        raise NumericalError("scaling factors must be positive")
    sq = np.sqrt(d)
    sym = sq[:, None] * s * sq[None, :]
    lam, W = jacobi_eigh(0.5 * (sym + sym.T))
    order = np.argsort(-lam, kind="stable")
    lam, W = lam[order], W[:, order]
    # V is D^½ W up to positive column scaling, so orient on that
    return _from_w(lam, W * orientation_signs(sq[:, None] * W), d)


def eigenspaces(lam: np.ndarray, tol: float = DEGENERACY_TOL) -> list[list[int]]:
    """Group (descending-sorted) eigenvalue indices into degenerate runs."""
    groups: list[list[int]] = []
    for k, value in enumerate(lam):
        if groups and abs(lam[groups[-1][-1]] - value) <= tol * max(1.0, abs(value)):
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


# ---------------------------------------------------------------- single modes


def classify_mode(lam: float, gamma: float, ztol: float = 1e-9, ctol: float = CTOL) -> str:
    if abs(lam) <= ztol:
        return ZERO
    zeta = gamma / (2.0 * np.sqrt(-lam))
    if zeta < 1.0 - ctol:
        return UNDERDAMPED
    if zeta > 1.0 + ctol:
        return OVERDAMPED
    return CRITICAL


def mode_forced_response(kind, omega, zeta, q, t, gamma=None):
    """Rest-start response η̂(t) of one mode (vectorized over ``t``)."""
    eta, _ = _forced(kind, omega, zeta, q, np.asarray(t, dtype=float), gamma)
    return eta


def mode_forced_rate(kind, omega, zeta, q, t, gamma=None):
    _, rate = _forced(kind, omega, zeta, q, np.asarray(t, dtype=float), gamma)
    return rate


def _forced(kind, omega, zeta, q, t, gamma=None):
    if kind == ZERO:
        if gamma is None:
            gamma = 2.0 * zeta * omega
        e = np.exp(-gamma * t)
        return (q / gamma) * (t - (1.0 - e) / gamma), (q / gamma) * (1.0 - e)
    w2 = omega * omega
    if kind == UNDERDAMPED:
        r = np.sqrt(1.0 - zeta * zeta)
        sigma = omega * r
        e = np.exp(-zeta * omega * t)
        eta = (q / w2) * (1.0 - e / r * np.sin(sigma * t + np.arccos(zeta)))
        return eta, (q / sigma) * e * np.sin(sigma * t)
    if kind == OVERDAMPED:
        s = np.sqrt(zeta * zeta - 1.0)
        chi1, chi2 = zeta - s, zeta + s
        e1, e2 = np.exp(-omega * chi1 * t), np.exp(-omega * chi2 * t)
        eta = (q / w2) * (1.0 + (chi1 * e2 - chi2 * e1) / (2.0 * s))
        return eta, q / (2.0 * omega * s) * (e1 - e2)
    if kind == CRITICAL:
        e = np.exp(-omega * t)
        return (q / w2) * (1.0 - (1.0 + omega * t) * e), q * t * e
    raise ValueError(f"unknown mode class {kind!r}")


def _free(kind, omega, zeta, gamma, eta0, rate0, t):
    a = 0.5 * gamma
    if kind == ZERO:
        e = np.exp(-gamma * t)
        return eta0 + rate0 * (1.0 - e) / gamma, rate0 * e
    w2 = omega * omega
    if kind == UNDERDAMPED:
        sig = omega * np.sqrt(1.0 - zeta * zeta)
        e = np.exp(-a * t)
        c, s = np.cos(sig * t), np.sin(sig * t)
        eta = e * (eta0 * c + (rate0 + a * eta0) / sig * s)
        rate = e * (rate0 * c - (a * rate0 + w2 * eta0) / sig * s)
        return eta, rate
    if kind == OVERDAMPED:
        beta = omega * np.sqrt(zeta * zeta - 1.0)
        slow, fast = np.exp(-(a - beta) * t), np.exp(-(a + beta) * t)
        ch, sh = 0.5 * (slow + fast), 0.5 * (slow - fast)
        eta = eta0 * ch + (rate0 + a * eta0) / beta * sh
        rate = rate0 * ch - (a * rate0 + w2 * eta0) / beta * sh
        return eta, rate
    if kind == CRITICAL:
        e = np.exp(-a * t)
        eta = e * (eta0 + (rate0 + a * eta0) * t)
        rate = e * (rate0 - a * (rate0 + a * eta0) * t)
        return eta, rate
    raise ValueError(f"unknown mode class {kind!r}")


def mode_full_response(eta0, rate0, q, kind, omega, zeta, gamma, t):
    """(η(t), η'(t)) for arbitrary initial conditions: free plus forced part."""
    t = np.asarray(t, dtype=float)
    fe, fr = _free(kind, omega, zeta, gamma, eta0, rate0, t)
    ge, gr = _forced(kind, omega, zeta, q, t, gamma)
    return fe + ge, fr + gr


def mode_bounds(omega, zeta, q, t):
    r = np.sqrt(1.0 - zeta * zeta)
    e = np.abs(q) * np.exp(-zeta * omega * np.asarray(t, dtype=float))
    base = q * r
    scale = omega * omega * r
    return (base - e) / scale, (base + e) / scale


def mode_peak(omega, zeta, q):
    r = np.sqrt(1.0 - zeta * zeta)
    t_peak = np.pi / (omega * r)
    return t_peak, (q / omega**2) * (1.0 + np.exp(-np.pi * zeta / r))


# ---------------------------------------------------------------- modal basis


@dataclass(frozen=True, eq=False)
class ModalBasis:
    lam: np.ndarray
    V: np.ndarray
    Vinv: np.ndarray
    W: np.ndarray
    d_scale: np.ndarray
    q: np.ndarray
    gamma: float
    omega: np.ndarray
    zeta: np.ndarray
    kinds: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.lam.size

    @property
    def nonzero(self) -> np.ndarray:
        return np.array([k != ZERO for k in self.kinds])

    @property
    def zero_modes(self) -> np.ndarray:
        return np.flatnonzero(~self.nonzero)

    def with_spectrum(self, spec: Spectrum, p: np.ndarray) -> "ModalBasis":
        return _basis_from(spec, p, self.gamma, self._ztol())

    def _ztol(self) -> float:
        return 1e-9 * max(1.0, float(np.max(np.abs(self.lam), initial=0.0)))

    def forced(self, t, modes=None) -> tuple[np.ndarray, np.ndarray]:
        """Forced η and η' for the selected modes, shape (modes, len(t))."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = range(self.n) if modes is None else modes
        eta, rate = [], []
        for k in idx:
            e, r = _forced(self.kinds[k], self.omega[k], self.zeta[k], self.q[k], t, self.gamma)
            eta.append(e)
            rate.append(r)
        return np.array(eta).reshape(-1, t.size), np.array(rate).reshape(-1, t.size)

    def response(self, t, theta0=None, thetadot0=None):
        """θ(t), θ'(t) from arbitrary initial conditions, shape (n, len(t))."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        eta0 = np.zeros(self.n) if theta0 is None else self.Vinv @ np.asarray(theta0, float)
        rate0 = np.zeros(self.n) if thetadot0 is None else self.Vinv @ np.asarray(thetadot0, float)
        eta = np.empty((self.n, t.size))
        rate = np.empty((self.n, t.size))
        for k in range(self.n):
            eta[k], rate[k] = mode_full_response(
                eta0[k], rate0[k], self.q[k], self.kinds[k], self.omega[k],
                self.zeta[k], self.gamma, t,
            )
        return self.V @ eta, self.V @ rate

    def steady_modes(self) -> np.ndarray:
        if np.any(np.abs(self.q[~self.nonzero]) > 1e-10 * max(1.0, np.abs(self.q).max())):
            raise NumericalError("unbalanced forcing: the zero mode drifts, no steady state")
        out = np.zeros(self.n)
        nz = self.nonzero
        out[nz] = self.q[nz] / self.omega[nz] ** 2
        return out


def _basis_from(spec: Spectrum, p, gamma: float, ztol: float) -> ModalBasis:
    lam = spec.lam
    kinds = tuple(classify_mode(min(x, 0.0), gamma, ztol) for x in lam)
    omega = np.sqrt(np.clip(-lam, 0.0, None))
    omega[np.array([k == ZERO for k in kinds])] = 0.0
    with np.errstate(divide="ignore"):
        zeta = np.where(omega > 0, gamma / (2.0 * np.where(omega > 0, omega, 1.0)), np.inf)
    return ModalBasis(
        lam=lam, V=spec.V, Vinv=spec.Vinv, W=spec.W, d_scale=spec.d,
        q=spec.Vinv @ np.asarray(p, dtype=float), gamma=float(gamma),
        omega=omega, zeta=zeta, kinds=kinds,
    )


def decompose(sys: LinearizedSystem) -> ModalBasis:
    if not sys.homogeneous:
        raise NumericalError(
            "damping is heterogeneous; use the block decomposition "
            "(swingsym.deviation.build_block_decomposition) instead"
        )
    spec = symmetrized_eig(sys.d_scale, sys.l_bar)
    norm = float(np.max(np.sum(np.abs(sys.L), axis=1), initial=0.0))
    if np.any(spec.lam > UNSTABLE_TOL * max(1.0, norm)):
        raise NumericalError(
            f"positive eigenvalue {spec.lam.max():.3e}: operating point is not stable"
        )
    return _basis_from(spec, sys.p, float(np.mean(sys.gamma)), 1e-9 * max(1.0, norm))


def reconstruct(basis: ModalBasis, eta) -> np.ndarray:
    return basis.V @ np.asarray(eta, dtype=float)


def steady_state(basis: ModalBasis) -> np.ndarray:
    """Steady displacement for a rest start (zero-mode constant = 0)."""
    return basis.V @ basis.steady_modes()


def _line_coeffs(basis: ModalBasis, net: GridNetwork, i: int, j: int) -> np.ndarray:
    return net.flow_weight(i, j) * (basis.V[j] - basis.V[i])


def modal_flows(basis: ModalBasis, net: GridNetwork, i: int, j: int, t) -> np.ndarray:
    """Flow on line (i, j) from the forced modal responses."""
    nz = np.flatnonzero(basis.nonzero)
    coeffs = _line_coeffs(basis, net, i, j)[nz]
    eta, _ = basis.forced(t, nz)
    return coeffs @ eta


def flow_upper_bound(basis: ModalBasis, net: GridNetwork, i: int, j: int, t) -> np.ndarray:
    """Envelope bound on |F_ij(t)|: Σ_k |C_k| max(|η_k^-|, |η_k^+|)."""
    nz = np.flatnonzero(basis.nonzero)
    if any(basis.kinds[k] != UNDERDAMPED for k in nz):
        raise NumericalError("envelope bound requires every nonzero mode to be underdamped")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    coeffs = _line_coeffs(basis, net, i, j)
    total = np.zeros(t.size)
    for k in nz:
        lo, hi = mode_bounds(basis.omega[k], basis.zeta[k], basis.q[k], t)
        total += abs(coeffs[k]) * np.maximum(np.abs(lo), np.abs(hi))
    return total
