"""Deviations from the cluster average: redundant-mode and block analyses.

With homogeneous damping the deviation of a node from its cluster average is
carried by the redundant modes alone.  With cluster-wise damping an
orthogonal change of coordinates T splits the system into the quotient
block and blocks of within-cluster differences, each of which can be
analysed on its own.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import modal, peaks
from .errors import NumericalError, SymmetryError
from .linearization import LinearizedSystem
from .simulate import DEFAULT_STEP, integrate_matrix, signed_abs_max
from .symmetry import EigenSplit, SymmetryPartition

BLOCK_TOL = 1e-10


@dataclass(frozen=True)
class PeakRow:
    """One table row: steady state, first peak, the peak-method maximum and a
    dense-scan maximum of the linear trajectory."""

    label: str
    steady: float
    first_peak: float
    first_peak_time: float
    peak_found: bool
    max_value: float
    max_source: str
    linear_max: float
    linear_max_time: float
    method: str

    @property
    def later_peak_warning(self) -> bool:
        return abs(self.linear_max) > abs(self.max_value) + 1e-6


def peak_row(label: str, comb: peaks.ModeCombination, step: float = DEFAULT_STEP,
             horizon: float | None = None) -> PeakRow:
    first = peaks.find_first_peak(comb)
    ss = comb.ss_value
    if first.found and abs(first.value) > abs(ss):
        best, src = first.value, "first-peak"
    else:
        best, src = ss, "steady-state"
    if comb.size:
        t_lin, v_lin = peaks.dense_scan_max(comb, step, horizon)
    else:
        t_lin, v_lin = 0.0, 0.0
    return PeakRow(label, ss, first.value, first.time, first.found, best, src,
                   v_lin, t_lin, "closed-form")


def numeric_peak_row(label: str, times, values, steady: float) -> PeakRow:
    """Table row from sampled values (first extremum found on the samples)."""
    values = np.asarray(values, dtype=float)
    dv = np.diff(values)
    turn = np.flatnonzero(np.sign(dv[1:]) * np.sign(dv[:-1]) < 0)
    if turn.size:
        k = int(turn[0]) + 1
        first, t_first, found = float(values[k]), float(times[k]), True
    else:
        first, t_first, found = 0.0, 0.0, False
    best, src = (first, "first-peak") if found and abs(first) > abs(steady) else (steady, "steady-state")
    t_lin, v_lin = signed_abs_max(times, values)
    return PeakRow(label, steady, first, t_first, found, best, src, v_lin, t_lin, "rk4")


# ---------------------------------------------------------------- homogeneous damping



def deviation_trajectory(split: EigenSplit, t) -> np.ndarray:
    """ε(t) = V_red η_red(t), shape (n, len(t))."""
    eta, _ = split.basis.forced(t, split.redundant)
    return split.basis.V[:, split.redundant] @ eta


def deviation_combination(split: EigenSplit, node: int) -> peaks.ModeCombination:
    b = split.basis
    red = split.redundant
    coeffs = b.V[node, red]
    weight = np.abs(coeffs * b.q[red])
    scale = max(float(weight.max(initial=0.0)), 1e-300)
    keep = b.nonzero[red] & (weight > 1e-14 * scale)
    return peaks.ModeCombination(coeffs[keep], b.q[red][keep], b.omega[red][keep], b.gamma / 2.0)


def deviation_peak(split: EigenSplit, node: int, label: str | None = None,
                   step: float = DEFAULT_STEP, horizon: float | None = None) -> PeakRow:
    """Steady state, first peak and maximum of ε_node."""
    comb = deviation_combination(split, node)
    return peak_row(label or f"node {node + 1}", comb, step, horizon)


# ---------------------------------------------------------------- block decomposition


def helmert_rows(size: int) -> np.ndarray:
    """Orthonormal zero-sum rows; row k is member k minus the mean of the ones before."""
    rows = np.zeros((size - 1, size))
    for k in range(1, size):
        rows[k - 1, :k] = -1.0
        rows[k - 1, k] = float(k)
        rows[k - 1] /= np.sqrt(k * (k + 1.0))
    return rows


@dataclass(frozen=True)
class Block:
    rows: tuple[int, ...]
    clusters: tuple[int, ...]
    kind: str  # "quotient", "isolated" or "intertwined"


@dataclass(frozen=True, eq=False)
class BlockDecomposition:
    T: np.ndarray
    B: np.ndarray
    r: np.ndarray
    gamma_orth: np.ndarray
    d_orth: np.ndarray
    s_orth: np.ndarray
    row_cluster: np.ndarray
    row_labels: tuple[str, ...]
    blocks: tuple[Block, ...]
    partition: SymmetryPartition
    q: int

    @property
    def deviation_blocks(self) -> list[Block]:
        return [b for b in self.blocks if b.kind != "quotient"]

    def block_of_row(self, row: int) -> Block:
        for b in self.blocks:
            if row in b.rows:
                return b
        raise KeyError(row)


def helmert_label(members, k: int, ids) -> str:
    """Readable name of Helmert row k (1-based) over the cluster members."""
    head = f"theta_{ids[members[k]]}"
    if k == 1:
        return f"({head}-theta_{ids[members[0]]})/sqrt2"
    before = "+".join(f"theta_{ids[i]}" for i in members[:k])
    return f"({k}*{head}-({before}))/sqrt{k * (k + 1)}"


def build_block_decomposition(
    sys: LinearizedSystem, part: SymmetryPartition, ids=None, tol: float = BLOCK_TOL
) -> BlockDecomposition:
    n = sys.n
    if part.n != n:
        raise SymmetryError("partition size does not match the system")
    ids = [str(i + 1) for i in range(n)] if ids is None else list(ids)
    for name, vec in (("damping", sys.gamma), ("scaling", sys.d_scale)):
        for c in part.clusters:
            if np.ptp(vec[list(c)]) > 1e-12 * max(1.0, float(np.max(np.abs(vec)))):
                raise SymmetryError(f"{name} is not constant on cluster {[ids[i] for i in c]}")

    quotient_rows, redundant_rows, row_cluster, labels = [], [], [], []
    red_cluster, red_labels = [], []
    for k, c in enumerate(part.clusters):
        size = len(c)
        row = np.zeros(n)
        row[list(c)] = 1.0 / np.sqrt(size)
        quotient_rows.append(row)
        row_cluster.append(k)
        labels.append("mean(" + ",".join(f"theta_{ids[i]}" for i in c) + ")")
        for h_index, h in enumerate(helmert_rows(size), start=1):
            row = np.zeros(n)
            row[list(c)] = h
            redundant_rows.append(row)
            red_cluster.append(k)
            red_labels.append(helmert_label(c, h_index, ids))
    T = np.array(quotient_rows + redundant_rows).reshape(n, n)
    row_cluster = np.array(row_cluster + red_cluster)
    labels = labels + red_labels

    q = part.q
    d_orth = sys.d_scale[[part.clusters[k][0] for k in row_cluster]]
    s_orth = T @ sys.l_bar @ T.T
    s_orth = 0.5 * (s_orth + s_orth.T)
    B = T @ sys.L @ T.T
    gamma_orth = T @ np.diag(sys.gamma) @ T.T
    scale = max(1.0, float(np.max(np.abs(B))))
    leak = np.max(np.abs(B[:q, q:]), initial=0.0), np.max(np.abs(B[q:, :q]), initial=0.0)
    if max(leak) > tol * scale:
        raise SymmetryError(
            f"partition is not equitable for the linearized system (leak {max(leak):.2e})"
        )

    blocks = [Block(tuple(range(q)), tuple(range(q)), "quotient")]
    red = list(range(q, n))
    pattern = np.abs(B) > tol * scale
    pattern = pattern | pattern.T
    seen = set()
    for start in red:
        if start in seen:
            continue
        stack, comp = [start], []
        seen.add(start)
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in red:
                if w not in seen and pattern[v, w]:
                    seen.add(w)
                    stack.append(w)
        comp.sort()
        clusters = tuple(sorted({int(row_cluster[i]) for i in comp}))
        blocks.append(Block(tuple(comp), clusters, "isolated" if len(clusters) == 1 else "intertwined"))

    return BlockDecomposition(
        T=T, B=B, r=T @ sys.p, gamma_orth=gamma_orth, d_orth=d_orth, s_orth=s_orth,
        row_cluster=row_cluster, row_labels=tuple(labels), blocks=tuple(blocks),
        partition=part, q=q,
    )


def _block_gamma(dec: BlockDecomposition, block: Block) -> np.ndarray:
    return np.diag(dec.gamma_orth)[list(block.rows)]


def block_modes(dec: BlockDecomposition, block: Block) -> modal.ModalBasis | None:
    """Uncoupled modes κ'' = -γ κ' + ξ κ + τ of one block, or None when the
    damping varies inside the block (closed forms do not apply)."""
    gam = _block_gamma(dec, block)
    if np.ptp(gam) > 1e-12 * max(1.0, float(np.max(gam))):
        return None
    rows = list(block.rows)
    spec = modal.symmetrized_eig(dec.d_orth[rows], dec.s_orth[np.ix_(rows, rows)])
    norm = float(np.max(np.sum(np.abs(dec.B[np.ix_(rows, rows)]), axis=1)))
    if np.any(spec.lam > modal.UNSTABLE_TOL * max(1.0, norm)):
        raise NumericalError("unstable block in the deviation dynamics")
    return modal._basis_from(spec, dec.r[rows], float(gam[0]), 1e-9 * max(1.0, norm))


def _block_series(dec: BlockDecomposition, block: Block, times: np.ndarray) -> np.ndarray:
    """Block coordinates ξ(t) for a rest start, by closed form or RK4."""
    basis = block_modes(dec, block)
    if basis is not None:
        eta, _ = basis.forced(times)
        return basis.V @ eta
    rows = list(block.rows)
    if times.size < 2:
        return np.zeros((len(rows), times.size))
    spacing = float(times[1] - times[0])
    if not np.allclose(np.diff(times), spacing) or times[0] != 0.0:
        raise NumericalError("numeric block integration needs a uniform grid starting at 0")
    sub = max(1, int(np.ceil(spacing / DEFAULT_STEP - 1e-9)))
    traj = integrate_matrix(dec.B[np.ix_(rows, rows)], _block_gamma(dec, block),
                            dec.r[rows], horizon=float(times[-1]), step=spacing / sub, stride=sub)
    return traj.theta[:, : times.size]


def _rk4_grid(dec: BlockDecomposition, block: Block, step: float, horizon: float | None):
    if horizon is None:
        horizon = 40.0 / float(np.min(_block_gamma(dec, block)))
    n_steps = int(round(horizon / step))
    return np.arange(n_steps + 1) * step


def block_deviation_peaks(
    dec: BlockDecomposition, block: Block, step: float = DEFAULT_STEP, horizon: float | None = None
) -> list[PeakRow]:
    """Table rows (steady, first peak, max, dense-scan max) for each row of a block."""
    basis = block_modes(dec, block)
    rows = list(block.rows)
    out = []
    if basis is not None:
        for k, r in enumerate(rows):
            sel = np.zeros(len(rows))
            sel[k] = 1.0
            comb = peaks.combination_from_row(basis, sel)
            out.append(peak_row(dec.row_labels[r], comb, step, horizon))
        return out
    times = _rk4_grid(dec, block, step, horizon)
    series = _block_series(dec, block, times)
    steady = np.linalg.solve(dec.B[np.ix_(rows, rows)], -dec.r[rows])
    for k, r in enumerate(rows):
        out.append(numeric_peak_row(dec.row_labels[r], times, series[k], float(steady[k])))
    return out


def block_trajectory(dec: BlockDecomposition, times) -> np.ndarray:
    """All block coordinates ξ(t) = T θ(t) for a rest start, shape (n, len(t))."""
    times = np.asarray(times, dtype=float)
    out = np.zeros((dec.T.shape[0], times.size))
    for block in dec.blocks:
        out[list(block.rows)] = _block_series(dec, block, times)
    return out


@dataclass(frozen=True, eq=False)
class NodeDeviation:
    node: int
    times: np.ndarray
    values: np.ndarray
    row: PeakRow
    combination: peaks.ModeCombination | None = field(default=None)


def node_deviation_from_block(
    dec: BlockDecomposition, node: int, label: str | None = None,
    step: float = DEFAULT_STEP, horizon: float | None = None,
) -> NodeDeviation:
    """ε_node(t) = θ_node(t) - cluster mean, mapped back through Tᵀ."""
    k = int(dec.partition.node_map[node])
    rows = [r for r in range(dec.q, dec.T.shape[0]) if dec.row_cluster[r] == k]
    label = label or f"node {node + 1}"
    if not rows:
        times = np.array([0.0])
        zero = peaks.ModeCombination([], [], [], 1.0)
        return NodeDeviation(node, times, np.zeros(1), peak_row(label, zero), zero)

    involved = []
    for r in rows:
        b = dec.block_of_row(r)
        if b not in involved:
            involved.append(b)
    bases = [block_modes(dec, b) for b in involved]
    gammas = [m.gamma for m in bases if m is not None]
    shared = len(gammas) == len(bases) and np.ptp(gammas) <= 1e-12 * max(1.0, max(gammas))

    if shared:
        coeffs, qs, omegas = [], [], []
        for b, m in zip(involved, bases):
            weights = dec.T[list(b.rows), node]
            c = weights @ m.V
            nz = m.nonzero & (np.abs(c * m.q) > 0)
            coeffs.append(c[nz])
            qs.append(m.q[nz])
            omegas.append(m.omega[nz])
        comb = peaks.ModeCombination(np.concatenate(coeffs), np.concatenate(qs),
                                     np.concatenate(omegas), float(np.mean(gammas)) / 2.0)
        row = peak_row(label, comb, step, horizon)
        times = _rk4_grid(dec, involved[0], step, horizon)
        return NodeDeviation(node, times, comb.value(times), row, comb)

    if horizon is None:
        horizon = max(40.0 / float(np.min(_block_gamma(dec, b))) for b in involved)
    times = np.arange(int(round(horizon / step)) + 1) * step
    values = np.zeros(times.size)
    steady = 0.0
    for b in involved:
        rows_b = list(b.rows)
        series = _block_series(dec, b, times)
        weights = dec.T[rows_b, node]
        values += weights @ series
        steady += float(weights @ np.linalg.solve(dec.B[np.ix_(rows_b, rows_b)], -dec.r[rows_b]))
    return NodeDeviation(node, times, values, numeric_peak_row(label, times, values, steady))
