"""Cyclic Jacobi eigensolver for dense symmetric matrices.

Rotations are applied in round-robin (tournament) order: each round holds
n/2 disjoint index pairs, so a whole round is one vectorized row/column
update. A sweep is n-1 rounds and visits every pair exactly once.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError


def _tournament(m: int) -> list[tuple[np.ndarray, np.ndarray]]:
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        top, bot = players[: m // 2], players[m // 2 :][::-1]
        rounds.append((np.array(top), np.array(bot)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diag(a))
    return float(np.linalg.norm(off))


def jacobi_eigh(s, tol: float = 1e-12, max_sweeps: int = 60):
    """Eigen-decomposition of a real symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvectors as orthonormal
    columns, unsorted. Iterates until the off-diagonal Frobenius norm is at
    most ``tol * ||s||_F``.
    """
    a = np.array(s, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max(initial=0))):
        raise ValueError("matrix must be symmetric")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    if n < 2:
        return np.diag(a).copy(), v

    target = tol * np.linalg.norm(a)
    m = n + (n % 2)
    rounds = []
    for top, bot in _tournament(m):
        keep = (top < n) & (bot < n)
        p, q = np.minimum(top[keep], bot[keep]), np.maximum(top[keep], bot[keep])
        rounds.append((p, q))

    for _ in range(max_sweeps):
        if off_norm(a) <= target:
            break
        for p, q in rounds:
            apq = a[p, q]
            big = np.abs(apq) > 1e-300
            if not np.any(big):
                continue
            p, q, apq = p[big], q[big], apq[big]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t[theta == 0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s_ = t * c
            # A <- A P (columns), then A <- P^T A (rows), V <- V P
            cp, cq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * cp - s_ * cq
            a[:, q] = s_ * cp + c * cq
            rp, rq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * rp - s_[:, None] * rq
            a[q, :] = s_[:, None] * rp + c[:, None] * rq
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s_ * vq
            v[:, q] = s_ * vp + c * vq
    else:
        if off_norm(a) > target:
            raise NumericalError(
                f"Jacobi did not converge in {max_sweeps} sweeps (off-norm {off_norm(a):.3e})"
            )
    return np.diag(a).copy(), v
