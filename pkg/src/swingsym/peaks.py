"""First-peak search for linear combinations of forced second-order modes.

A combination F(t) = Σ_k C_k η_k(t) of rest-start modes sharing the decay
a = γ/2 has derivative F'(t) = e^{-at} g(t) with

    g(t) = Σ_k C_k q_k φ_k(t),   φ_k(t) = sin(ς_k t)/ς_k,

where ς_k² = ω_k² - a².  For overdamped modes ς_k² < 0 and φ_k becomes
sinh(|ς_k| t)/|ς_k|; critically damped modes give φ_k = t.  Extrema of F are
therefore the positive roots of g.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import modal
from .errors import NumericalError

NEWTON_MAX_ITER = 100
TAYLOR_MIN_ZETA = 0.2
SIGMA_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ModeCombination:
    coeffs: np.ndarray
    q: np.ndarray
    omega: np.ndarray
    decay: float

    def __post_init__(self):
        put = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        for name in ("coeffs", "q", "omega"):
            put(name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        if not (self.coeffs.shape == self.q.shape == self.omega.shape):
            raise ValueError("coeffs, q and omega must have equal length")
        if not self.decay > 0:
            raise ValueError("decay must be positive")
        if np.any(self.omega <= 0):
            raise ValueError("mode frequencies must be positive (drop zero modes)")
        put("decay", float(self.decay))

    @property
    def size(self) -> int:
        return self.coeffs.size

    @property
    def weights(self) -> np.ndarray:
        return self.coeffs * self.q

    @property
    def zeta(self) -> np.ndarray:
        return self.decay / self.omega

    @property
    def sigma_sq(self) -> np.ndarray:
        """Signed ς² = ω² - a²; negative for overdamped modes."""
        return self.omega**2 - self.decay**2

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(modal.classify_mode(-w * w, 2.0 * self.decay) for w in self.omega)

    @property
    def underdamped(self) -> np.ndarray:
        return np.array([k == modal.UNDERDAMPED for k in self.kinds], dtype=bool)

    @property
    def sigma(self) -> np.ndarray:
        """Damped frequency of each underdamped mode (nan elsewhere)."""
        return np.where(self.underdamped, np.sqrt(np.abs(self.sigma_sq)), np.nan)

    @property
    def ss_value(self) -> float:
        return float(np.sum(self.weights / self.omega**2))

    def value(self, t) -> np.ndarray:
        """F(t) from the closed-form mode responses."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for c, q, w, kind in zip(self.coeffs, self.q, self.omega, self.kinds):
            out = out + c * modal.mode_forced_response(kind, w, self.decay / w, q, t)
        return out

    def rate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.exp(-self.decay * t) * stationarity_residual(self, t)

    def restrict(self, mask) -> "ModeCombination":
        mask = np.asarray(mask, dtype=bool)
        return ModeCombination(self.coeffs[mask], self.q[mask], self.omega[mask], self.decay)


def combination_from_row(basis: modal.ModalBasis, row, drop_tol: float = 1e-14) -> ModeCombination:
    """Combination for the observable ``row · θ(t)`` on a rest-start trajectory."""
    coeffs = np.asarray(row, dtype=float) @ basis.V
    scale = max(float(np.max(np.abs(coeffs * basis.q), initial=0.0)), 1e-300)
    keep = basis.nonzero & (np.abs(coeffs * basis.q) > drop_tol * scale)
    return ModeCombination(coeffs[keep], basis.q[keep], basis.omega[keep], basis.gamma / 2.0)


def combination_for_line(basis: modal.ModalBasis, net, i: int, j: int) -> ModeCombination:
    row = np.zeros(basis.n)
    w = net.flow_weight(i, j)
    row[j], row[i] = w, -w
    return combination_from_row(basis, row)


# ---------------------------------------------------------------- residual


def _phi(sigma_sq: np.ndarray, t: np.ndarray):
    """φ_k(t) and φ_k'(t) with shape (modes, *t.shape)."""
    s = np.sqrt(np.abs(sigma_sq))[:, None]
    tt = np.atleast_1d(t).ravel()[None, :]
    osc = sigma_sq[:, None] > 0
    flat = s < SIGMA_TOL
    safe = np.where(flat, 1.0, s)
    st = safe * tt
    phi = np.where(flat, tt, np.where(osc, np.sin(st), np.sinh(st)) / safe)
    dphi = np.where(flat, 1.0, np.where(osc, np.cos(st), np.cosh(st)))
    shape = (sigma_sq.size,) + np.shape(t)
    return phi.reshape(shape), dphi.reshape(shape)


def stationarity_residual(comb: ModeCombination, t):
    t = np.asarray(t, dtype=float)
    phi, _ = _phi(comb.sigma_sq, t)
    return np.tensordot(comb.weights, phi, axes=1)


def _residual_slope(comb: ModeCombination, t: float) -> float:
    _, dphi = _phi(comb.sigma_sq, np.asarray(t))
    return float(comb.weights @ dphi)


def _leading_sign(comb: ModeCombination) -> float:
    """Sign of g just after 0, from the first non-vanishing Taylor term."""
    w = comb.weights
    scale = float(np.sum(np.abs(w)))
    if scale == 0.0:
        return 0.0
    moment = np.ones_like(w)
    for order in range(4):
        # g(t) ~ Σ_r (-1)^r Σ_k w_k ς_k^{2r} t^{2r+1} / (2r+1)!
        term = (-1) ** order * float(w @ moment)
        if abs(term) > 1e-12 * scale * float(np.max(np.abs(moment))):
            return float(np.sign(term))
        moment = moment * comb.sigma_sq
    return 0.0


# ---------------------------------------------------------------- guesses


def taylor_initial_guess(comb: ModeCombination) -> float | None:
    """√(6 ΣC_kq_k / ΣC_kq_kς_k²), or None when the radicand is not positive."""
    num = float(np.sum(comb.weights))
    den = float(np.sum(comb.weights * comb.sigma_sq))
    if num == 0.0 or den == 0.0 or num / den <= 0.0:
        return None
    return float(np.sqrt(6.0 * num / den))


def cumulative_guess(comb: ModeCombination, mode_peak_times=None, mode_peak_values=None):
    """Peak time of the mode at which the running sum of C_k η_k^peak is largest.

    Modes are taken in order of their individual peak times π/ς_k. Without
    explicit peak data only underdamped modes take part; returns None when
    none are available.
    """
    if mode_peak_times is None or mode_peak_values is None:
        under = comb.underdamped
        if not np.any(under):
            return None
        sub = comb.restrict(under)
        times, values = modal.mode_peak(sub.omega, sub.zeta, sub.q)
        mode_peak_times, mode_peak_values = times, sub.coeffs * values
    times = np.asarray(mode_peak_times, dtype=float)
    values = np.asarray(mode_peak_values, dtype=float)
    if times.size == 0:
        return None
    order = np.argsort(times, kind="stable")
    running = np.cumsum(values[order])
    best = int(np.argmax(np.abs(running)))
    return float(times[order][best])


# ---------------------------------------------------------------- search


@dataclass(frozen=True)
class PeakResult:
    time: float
    value: float
    found: bool
    guess: str


def _window(comb: ModeCombination) -> tuple[float, float]:
    """Scan horizon and step for bracketing the first root of g."""
    s = np.sqrt(np.abs(comb.sigma_sq))
    under = comb.underdamped
    if np.any(under):
        horizon = 2.0 * np.pi / float(np.min(s[under]))
    else:
        horizon = 20.0 / comb.decay
    fastest = float(np.max(s, initial=0.0))
    step = np.pi / (8.0 * fastest) if fastest > SIGMA_TOL else horizon / 64.0
    return horizon, min(step, horizon / 8.0)


def _newton(comb: ModeCombination, t0: float, tol: float, horizon: float) -> float | None:
    t = t0
    for _ in range(NEWTON_MAX_ITER):
        g = float(stationarity_residual(comb, t))
        if abs(g) <= tol:
            return t
        slope = _residual_slope(comb, t)
        if slope == 0.0 or not np.isfinite(slope):
            return None
        t = t - g / slope
        if not (0.0 < t <= horizon):
            return None
    return None


def _first_bracket(comb: ModeCombination, lead: float, horizon: float, step: float):
    grid = np.arange(1, int(np.ceil(horizon / step)) + 1) * step
    g = stationarity_residual(comb, grid)
    flipped = np.flatnonzero(np.sign(g) == -lead)
    if flipped.size == 0:
        return None
    k = int(flipped[0])
    if k > 0:
        return float(grid[k - 1]), float(grid[k])
    # the change sits in (0, step]: walk the left end toward 0 until g has the lead sign
    left = step
    for _ in range(60):
        left *= 0.5
        if np.sign(float(stationarity_residual(comb, left))) == lead:
            return left, float(grid[0])
    return None


def find_first_peak(comb: ModeCombination) -> PeakResult:
    """Smallest t > 0 where g changes sign, and F evaluated there.

    Newton is seeded from the Taylor guess (well-damped combinations) or the
    cumulative guess, and its answer is only accepted when a scan of g at step
    π/(8 max ς) shows no earlier sign change. Otherwise the first bracket is
    refined by Brent's method. When g keeps one sign over the scan window the
    observable approaches its steady state monotonically and ``found`` is False.
    """
    lead = _leading_sign(comb)
    if comb.size == 0 or lead == 0.0:
        return PeakResult(0.0, 0.0, False, "none")
    horizon, step = _window(comb)
    s = np.sqrt(np.abs(comb.sigma_sq))
    scale = float(np.sum(np.abs(comb.weights) / np.where(s > SIGMA_TOL, s, 1.0 / horizon)))
    tol = 1e-12 * scale

    guess, label = None, "scan"
    if float(np.min(comb.zeta)) >= TAYLOR_MIN_ZETA:
        guess, label = taylor_initial_guess(comb), "taylor"
    if guess is None:
        guess, label = cumulative_guess(comb), "cumulative"
    if guess is None:
        label = "scan"

    bracket = _first_bracket(comb, lead, horizon, step)
    root = None if guess is None else _newton(comb, guess, tol, horizon)
    if root is not None and bracket is not None:
        lo, hi = bracket
        if not (lo - 1e-9 * hi <= root <= hi + 1e-9 * hi):
            root = None
    elif bracket is None:
        root = None
    if root is None:
        if bracket is None:
            return PeakResult(0.0, 0.0, False, label)
        g = lambda x: float(stationarity_residual(comb, x))  # noqa: E731
        root = brentq(g, *bracket, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=200)
        label = label + "+bisection"
    return PeakResult(float(root), float(comb.value(root)), True, label)


def max_abs_value(comb: ModeCombination) -> tuple[float, str]:
    """Larger in magnitude of the first-peak value and the steady-state value."""
    ss = comb.ss_value
    peak = find_first_peak(comb)
    if peak.found and abs(peak.value) > abs(ss):
        return peak.value, "first-peak"
    return ss, "steady-state"


def settling_time(comb: ModeCombination) -> float:
    """Time for the slowest mode envelope to shrink by e^-4."""
    if comb.size == 0:
        return 0.0
    rates = np.full(comb.size, comb.decay)
    over = comb.sigma_sq < 0
    rates[over] = comb.decay - np.sqrt(-comb.sigma_sq[over])
    return float(4.0 / np.min(rates))


def dense_scan_max(comb: ModeCombination, step: float = 1e-3, horizon: float | None = None):
    """(t, F(t)) at the largest |F| over a uniform grid, chunked to bound memory."""
    if horizon is None:
        horizon = 40.0 / (2.0 * comb.decay)
    if step <= 0 or horizon <= 0:
        raise NumericalError("scan step and horizon must be positive")
    if comb.size == 0:
        return 0.0, 0.0
    n = int(np.ceil(horizon / step)) + 1
    best_t, best_v = 0.0, 0.0
    for start in range(0, n, 200_000):
        t = np.arange(start, min(n, start + 200_000)) * step
        v = comb.value(t)
        k = int(np.argmax(np.abs(v)))
        if abs(v[k]) > abs(best_v):
            best_t, best_v = float(t[k]), float(v[k])
    return best_t, best_v
