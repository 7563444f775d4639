"""Automorphism orbits, equitable-partition checks and quotient networks.

Orbits are found exactly: color refinement on two copies of the graph side
by side makes colors comparable across copies, and a backtracking search over
individualized vertices produces explicit automorphisms whose closure gives
the orbit partition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import modal
from .errors import NumericalError, SymmetryError
from .linearization import LinearizedSystem
from .network import GridNetwork

WEIGHT_TOL = 1e-10
DEFAULT_NODE_CAP = 200_000


# ---------------------------------------------------------------- partitions


@dataclass(frozen=True, eq=False)
class SymmetryPartition:
    clusters: tuple[tuple[int, ...], ...]
    n: int
    generators: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        ordered = tuple(sorted((tuple(sorted(c)) for c in self.clusters), key=lambda c: c[0]))
        if sorted(i for c in ordered for i in c) != list(range(self.n)):
            raise SymmetryError("clusters must partition the node set")
        object.__setattr__(self, "clusters", ordered)

    @property
    def q(self) -> int:
        return len(self.clusters)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(c) for c in self.clusters])

    @property
    def E(self) -> np.ndarray:
        e = np.zeros((self.n, self.q))
        for k, c in enumerate(self.clusters):
            e[list(c), k] = 1.0
        return e

    @property
    def node_map(self) -> np.ndarray:
        out = np.empty(self.n, dtype=int)
        for k, c in enumerate(self.clusters):
            out[list(c)] = k
        return out

    @property
    def nontrivial(self) -> list[tuple[int, ...]]:
        return [c for c in self.clusters if len(c) > 1]

    def labels(self, ids: Sequence[str]) -> list[list[str]]:
        return [[ids[i] for i in c] for c in self.clusters]


def singleton_partition(n: int) -> SymmetryPartition:
    return SymmetryPartition(tuple((i,) for i in range(n)), n)


# ---------------------------------------------------------------- orbit search


def _quantize(x) -> int:
    return int(round(float(x) / WEIGHT_TOL))


class _Refiner:
    """Color refinement on the disjoint union of a weighted graph with itself."""

    def __init__(self, weights: np.ndarray, keys: Sequence[tuple]):
        n = weights.shape[0]
        self.n = n
        self.weights = weights
        self.directed = not np.array_equal(weights, weights.T)
        self.out: list[list[tuple[int, int]]] = [[] for _ in range(2 * n)]
        self.inn: list[list[tuple[int, int]]] = [[] for _ in range(2 * n)]
        for i, j in zip(*np.nonzero(weights)):
            w = _quantize(weights[i, j])
            for off in (0, n):
                self.out[i + off].append((j + off, w))
                self.inn[j + off].append((i + off, w))
        ranks = {k: r for r, k in enumerate(sorted(set(keys)))}
        self.seed = [ranks[k] for k in keys] * 2
        self.keys = list(keys)
        self.expanded = 0

    def refine(self, col: list[int]) -> list[int]:
        classes = len(set(col))
        while True:
            sigs = []
            for v in range(2 * self.n):
                sig = (col[v], tuple(sorted((col[u], w) for u, w in self.out[v])))
                if self.directed:
                    sig += (tuple(sorted((col[u], w) for u, w in self.inn[v])),)
                sigs.append(sig)
            ranks = {s: r for r, s in enumerate(sorted(set(sigs)))}
            col = [ranks[s] for s in sigs]
            if len(ranks) == classes:
                return col
            classes = len(ranks)

    def balanced(self, col: list[int]) -> bool:
        n = self.n
        return sorted(col[:n]) == sorted(col[n:])

    def is_automorphism(self, sigma: np.ndarray) -> bool:
        w = self.weights
        if any(self.keys[i] != self.keys[s] for i, s in enumerate(sigma)):
            return False
        return bool(np.max(np.abs(w[np.ix_(sigma, sigma)] - w), initial=0.0) <= WEIGHT_TOL)

    def extend(self, col: list[int], cap: int) -> np.ndarray | None:
        """Automorphism consistent with the individualized coloring, if any."""
        self.expanded += 1
        if self.expanded > cap:
            raise SymmetryError(
                f"orbit search exceeded {cap} expansions; "
                "supply 'clusters' in the network file instead"
            )
        col = self.refine(col)
        if not self.balanced(col):
            return None
        n = self.n
        first = col[:n]
        counts: dict[int, int] = {}
        for c in first:
            counts[c] = counts.get(c, 0) + 1
        open_cells = [c for c, k in counts.items() if k > 1]
        if not open_cells:
            where = {c: v - n for v, c in enumerate(col) if v >= n}
            sigma = np.array([where[c] for c in first])
            return sigma if self.is_automorphism(sigma) else None
        target = min(open_cells, key=lambda c: (counts[c], c))
        x = first.index(target)
        fresh = max(col) + 1
        for y in range(n, 2 * n):
            if col[y] != target:
                continue
            trial = list(col)
            trial[x] = trial[y] = fresh
            sigma = self.extend(trial, cap)
            if sigma is not None:
                return sigma
        return None


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _graph_of(obj) -> tuple[np.ndarray, list[tuple]]:
    if isinstance(obj, GridNetwork):
        d = obj.derived()
        weights = np.array(obj.coupling)
        keys = zip(d.gamma, d.j_scale, obj.multiplicity)
    elif isinstance(obj, LinearizedSystem):
        weights = obj.L - np.diag(np.diag(obj.L))
        keys = zip(obj.gamma, obj.j_scale, obj.multiplicity)
    else:
        raise TypeError("expected a GridNetwork or LinearizedSystem")
    return weights, [tuple(_quantize(x) for x in k) for k in keys]


def find_orbits(obj, node_cap: int = DEFAULT_NODE_CAP) -> SymmetryPartition:
    """Orbit partition of {P : P W = W P, P preserves γ, J and multiplicity}.

    ``obj`` is a GridNetwork (coupling weights, independent of any operating
    point) or a LinearizedSystem (off-diagonal of L).
    """
    weights, keys = _graph_of(obj)
    n = weights.shape[0]
    ref = _Refiner(weights, keys)
    base = ref.refine(list(ref.seed))
    uf = _UnionFind(n)
    generators = []

    cells: dict[int, list[int]] = {}
    for v in range(n):
        cells.setdefault(base[v], []).append(v)
    fresh = max(base) + 1
    for cell in cells.values():
        reps: list[int] = []
        for w in cell:
            for r in reps:
                if uf.find(r) == uf.find(w):
                    break
                trial = list(base)
                trial[r] = trial[w + n] = fresh
                sigma = ref.extend(trial, node_cap)
                if sigma is not None:
                    generators.append(tuple(int(s) for s in sigma))
                    for i, s in enumerate(sigma):
                        uf.union(i, int(s))
                    break
            else:
                reps.append(w)

    groups: dict[int, list[int]] = {}
    for v in range(n):
        groups.setdefault(uf.find(v), []).append(v)
    return SymmetryPartition(tuple(tuple(g) for g in groups.values()), n, tuple(generators))


# ---------------------------------------------------------------- validation


def _check_constant(values: np.ndarray, part: SymmetryPartition, what: str, ids, tol: float):
    for c in part.clusters:
        ref = values[c[0]]
        for i in c[1:]:
            if np.any(np.abs(values[i] - ref) > tol):
                raise SymmetryError(
                    f"{what} differs between nodes {ids[c[0]]!r} and {ids[i]!r} of one cluster"
                )


def _check_equitable(weights: np.ndarray, part: SymmetryPartition, what: str, ids):
    into = weights @ part.E
    tol = WEIGHT_TOL * max(1.0, float(np.max(np.abs(into), initial=0.0)))
    for c in part.clusters:
        for i in c[1:]:
            diff = np.abs(into[i] - into[c[0]])
            if np.any(diff > tol):
                k = int(np.argmax(diff))
                raise SymmetryError(
                    f"{what}: nodes {ids[c[0]]!r} and {ids[i]!r} couple differently "
                    f"into cluster {k + 1} ({into[c[0], k]:.6g} vs {into[i, k]:.6g})"
                )


def validate_partition(
    net: GridNetwork, clusters, lin: LinearizedSystem | None = None
) -> SymmetryPartition:
    """Check the operational conditions a cluster partition must meet downstream.

    Within a cluster γ, J and multiplicity agree, and every node has the same
    total coupling into each cluster, both for the coupling matrix and (when
    ``lin`` is given) for the linearized L.
    """
    part = clusters if isinstance(clusters, SymmetryPartition) else SymmetryPartition(
        tuple(tuple(int(i) for i in c) for c in clusters), net.n
    )
    if part.n != net.n:
        raise SymmetryError("partition size does not match the network")
    d = net.derived()
    ids = net.ids
    _check_constant(np.asarray(d.gamma), part, "damping gamma", ids, 1e-12)
    _check_constant(np.asarray(d.j_scale), part, "inertia scaling J", ids, 1e-12)
    _check_constant(np.asarray(net.multiplicity), part, "multiplicity", ids, 1e-12)
    _check_equitable(np.asarray(d.A), part, "coupling", ids)
    if lin is not None:
        off = lin.L - np.diag(np.diag(lin.L))
        try:
            _check_equitable(off, part, "linearized coupling", ids)
        except SymmetryError as exc:
            raise SymmetryError(
                f"{exc}; the operating point breaks the symmetry, try --theta-star zero"
            ) from None
    return part


def respects_symmetries(p, part: SymmetryPartition, tol: float = 1e-12) -> bool:
    p = np.asarray(p, dtype=float)
    return all(np.all(np.abs(p[list(c)] - p[c[0]]) <= tol) for c in part.clusters)


# ---------------------------------------------------------------- quotient


@dataclass(frozen=True, eq=False)
class QuotientSystem:
    """Cluster-level dynamics  θ̃'' = -Γ̃ θ̃' + L̃ θ̃ + p̃."""

    L_tilde: np.ndarray
    p_tilde: np.ndarray
    gamma_tilde: np.ndarray
    j_tilde: np.ndarray
    mult_tilde: np.ndarray
    l_bar: np.ndarray
    partition: SymmetryPartition
    theta_star: np.ndarray
    full_multiplicity: np.ndarray

    @property
    def node_map(self) -> np.ndarray:
        return self.partition.node_map

    @property
    def q(self) -> int:
        return self.partition.q

    @property
    def d_scale(self) -> np.ndarray:
        return self.j_tilde / self.mult_tilde

    def as_linear_system(self) -> LinearizedSystem:
        return LinearizedSystem(
            theta_star=self.theta_star,
            L=self.L_tilde,
            p=self.p_tilde,
            gamma=self.gamma_tilde,
            d_scale=self.d_scale,
            l_bar=self.l_bar,
            j_scale=self.j_tilde,
            multiplicity=self.mult_tilde,
        )

    def lift(self, values) -> np.ndarray:
        """Expand cluster values to full-network nodes (E θ̃)."""
        return np.asarray(values)[self.node_map]

    def average(self, values) -> np.ndarray:
        """Multiplicity-weighted cluster average of full-network values."""
        values = np.asarray(values, dtype=float)
        part = self.partition
        return np.stack(
            [
                np.average(values[list(c)], axis=0, weights=self.full_multiplicity[list(c)])
                for c in part.clusters
            ]
        )

    def zero_mode_forcing(self) -> float:
        return quotient_zero_mode_forcing(self)


def build_quotient(lin: LinearizedSystem, part: SymmetryPartition) -> QuotientSystem:
    E = part.E
    m = lin.multiplicity
    mt = E.T @ m
    avg = (E * m[:, None]).T / mt[:, None]  # (EᵀME)⁻¹EᵀM
    l_bar = E.T @ lin.l_bar @ E
    l_bar = 0.5 * (l_bar + l_bar.T)
    j_t = avg @ lin.j_scale
    return QuotientSystem(
        L_tilde=avg @ lin.L @ E,
        p_tilde=avg @ lin.p,
        gamma_tilde=avg @ lin.gamma,
        j_tilde=j_t,
        mult_tilde=mt,
        l_bar=l_bar,
        partition=part,
        theta_star=avg @ lin.theta_star,
        full_multiplicity=np.array(m),
    )


def quotient_network(net: GridNetwork, part: SymmetryPartition) -> GridNetwork:
    """Quotient as a directed network with multiplicities (file-exportable)."""
    E = part.E
    m = net.multiplicity
    mt = E.T @ m
    into = net.coupling @ E
    rep = [c[0] for c in part.clusters]
    w = into[rep]
    np.fill_diagonal(w, 0.0)
    lw = np.zeros_like(w)
    for k, ck in enumerate(part.clusters):
        for l, cl in enumerate(part.clusters):
            if k == l or w[k, l] == 0:
                continue
            block = net.line_weight[np.ix_(ck, cl)]
            vals = block[net.coupling[np.ix_(ck, cl)] > 0]
            lw[k, l] = vals[0] if np.ptp(vals) == 0 else w[k, l]
    b = (E * m[:, None]).T @ net.power / mt
    return GridNetwork(
        ids=tuple("+".join(net.ids[i] for i in c) for c in part.clusters),
        coupling=w,
        power=b,
        inertia=net.inertia[rep],
        damping_raw=net.damping_raw[rep],
        ref_frequency=net.ref_frequency,
        multiplicity=mt,
        line_weight=lw,
        directed=True,
    )


def quotient_zero_mode_forcing(qsys: QuotientSystem) -> float:
    """wᵀ p̃ for the left zero-eigenvector w = m̃ / J̃ of L̃."""
    w = qsys.mult_tilde / qsys.j_tilde
    return float(w @ qsys.p_tilde)


def inherited_spectrum_gap(full_lam, quot_lam) -> float:
    """Largest distance from a quotient eigenvalue to the nearest full eigenvalue."""
    full = np.asarray(full_lam, dtype=float)
    return float(max((np.min(np.abs(full - x)) for x in np.asarray(quot_lam)), default=0.0))


# ---------------------------------------------------------------- eigenvector split


@dataclass(frozen=True, eq=False)
class EigenSplit:
    basis: modal.ModalBasis
    nonredundant: np.ndarray
    redundant: np.ndarray

    @property
    def counts(self) -> tuple[int, int]:
        return self.nonredundant.size, self.redundant.size


def split_eigenvectors(
    basis: modal.ModalBasis, part: SymmetryPartition, p=None, tol: float = 1e-6
) -> EigenSplit:
    """Rotate degenerate eigenspaces so each eigenvector is cluster-constant or
    sums to zero on every cluster, and relabel the basis accordingly.

    Requires the scaling d (J over multiplicity) to be cluster-constant.
    """
    E = part.E
    if not respects_symmetries(basis.d_scale, part, tol=1e-12 * float(np.max(basis.d_scale))):
        raise SymmetryError("inertia scaling must be constant within clusters")
    proj = E @ np.linalg.solve(E.T @ E, E.T)
    W = np.array(basis.W)
    kinds = np.empty(basis.n, dtype=bool)  # True: non-redundant
    for group in modal.eigenspaces(basis.lam):
        U = W[:, group]
        parts = []
        for mat, flag in ((proj @ U, True), (U - proj @ U, False)):
            u, s, _ = np.linalg.svd(mat, full_matrices=False)
            if np.any((s > tol) & (s < 1 - tol)):
                raise NumericalError(
                    f"eigenvector near lambda={basis.lam[group[0]]:.6g} is neither "
                    "cluster-constant nor cluster-zero-sum"
                )
            keep = s >= 1 - tol
            parts.append((u[:, keep], flag))
        new = np.hstack([m for m, _ in parts])
        if new.shape[1] != len(group):
            raise NumericalError(
                f"could not separate the eigenspace near lambda={basis.lam[group[0]]:.6g}"
            )
        # re-orthonormalize inside the eigenspace to absorb round-off
        new, _ = np.linalg.qr(new)
        W[:, group] = new
        kinds[group] = [flag for m, flag in parts for _ in range(m.shape[1])]
    sq = np.sqrt(basis.d_scale)
    W = W * modal.orientation_signs(sq[:, None] * W)
    spec = modal._from_w(basis.lam, W, basis.d_scale)
    forcing = basis.V @ basis.q if p is None else p
    nb = basis.with_spectrum(spec, forcing)
    non = np.flatnonzero(kinds)
    red = np.flatnonzero(~kinds)
    if non.size != part.q or red.size != part.n - part.q:
        raise NumericalError(
            f"found {non.size} non-redundant and {red.size} redundant modes; "
            f"expected {part.q} and {part.n - part.q}"
        )
    return EigenSplit(basis=nb, nonredundant=non, redundant=red)
