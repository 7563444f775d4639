"""End-to-end analyses behind the command-line interface.

Each function returns an :class:`AnalysisReport` whose numbers all come from
the library operations; rendering only formats them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import modal, peaks, symmetry
from .deviation import (
    PeakRow,
    block_deviation_peaks,
    block_modes,
    build_block_decomposition,
    deviation_peak,
    node_deviation_from_block,
    numeric_peak_row,
    peak_row,
)
from .errors import NumericalError
from .linearization import LinearizedSystem, linearize
from .network import GridNetwork, connected_components, is_balanced
from .report import AnalysisReport, Table
from .simulate import (
    DEFAULT_STEP,
    default_horizon,
    flow_series,
    integrate_linear,
    integrate_nonlinear,
    max_abs_flow_on_trajectory,
    max_abs_on_trajectory,
)


@dataclass(frozen=True)
class Options:
    theta_star: str = "solve"
    gamma: float | None = None
    validate: bool = False
    horizon: float | None = None
    step: float = DEFAULT_STEP
    tol: float = 1e-10


def prepare(net: GridNetwork, opts: Options) -> tuple[GridNetwork, LinearizedSystem, str, list[str]]:
    """Apply overrides, pick the operating point and linearize."""
    warnings = []
    if opts.gamma is not None:
        net = net.with_gamma(opts.gamma)
    mode = opts.theta_star
    if mode == "solve" and not is_balanced(net):
        warnings.append("network is unbalanced: no fixed point, linearizing at theta=0; "
                        "angle steady states are undefined, flows only")
        mode = "zero"
    if mode == "solve" and len(connected_components(net)) > 1:
        warnings.append("network is disconnected: linearizing at theta=0")
        mode = "zero"
    return net, linearize(net, mode, opts.tol), mode, warnings


def _network_summary(net: GridNetwork, lin: LinearizedSystem, mode: str) -> dict:
    return {
        "nodes": list(net.ids),
        "lines": len(net.lines()),
        "balanced": is_balanced(net),
        "gamma": lin.gamma,
        "theta_star_mode": mode,
        "theta_star": lin.theta_star,
    }


def _row_dict(row: PeakRow) -> dict:
    return {
        "label": row.label,
        "steady_state": row.steady,
        "first_peak": row.first_peak,
        "first_peak_time": row.first_peak_time,
        "peak_found": row.peak_found,
        "max": row.max_value,
        "max_source": row.max_source,
        "linear_max": row.linear_max,
        "linear_max_time": row.linear_max_time,
        "method": row.method,
    }


def _later_peak_warnings(rows: list[PeakRow]) -> list[str]:
    return [
        f"{r.label}: dense scan finds |{r.linear_max:.4f}| above the first-peak/steady-state "
        f"maximum |{r.max_value:.4f}| (a later peak dominates)"
        for r in rows if r.method == "closed-form" and r.later_peak_warning
    ]


# ---------------------------------------------------------------- analyze


def _modes_table(basis: modal.ModalBasis) -> tuple[list[dict], Table]:
    modes, rows = [], []
    for k in range(basis.n):
        kind = basis.kinds[k]
        peak_t = None
        if kind == modal.UNDERDAMPED:
            peak_t = float(modal.mode_peak(basis.omega[k], basis.zeta[k], basis.q[k])[0])
        zeta = float(basis.zeta[k]) if np.isfinite(basis.zeta[k]) else None
        modes.append({"index": k + 1, "lambda": float(basis.lam[k]), "class": kind,
                      "omega": float(basis.omega[k]), "zeta": zeta,
                      "q": float(basis.q[k]), "peak_time": peak_t})
        rows.append([str(k + 1), float(basis.lam[k]), kind, float(basis.omega[k]), zeta,
                     float(basis.q[k])])
    return modes, Table("Modes", ["mode", "lambda", "class", "omega", "zeta", "q"], rows)


def analyze_network(net: GridNetwork, opts: Options = Options()) -> AnalysisReport:
    net, lin, mode, warnings = prepare(net, opts)
    data = {"network": _network_summary(net, lin, mode)}
    tables = []
    lines = net.lines()
    rows: list[PeakRow] = []
    horizon = opts.horizon
    if lin.homogeneous:
        basis = modal.decompose(lin)
        modes, table = _modes_table(basis)
        data["modes"] = modes
        tables.append(table)
        try:
            data["steady_state_angles"] = modal.steady_state(basis)
        except NumericalError:
            pass
        for i, j in lines:
            comb = peaks.combination_for_line(basis, net, i, j)
            rows.append(peak_row(net.line_label(i, j), comb, opts.step, horizon))
    else:
        warnings.append("damping is heterogeneous: line peaks come from RK4 integration "
                        "of the linear model, not from closed-form modes")
        data["modes"] = []
        traj = integrate_linear(lin, horizon=horizon or default_horizon(lin.gamma), step=opts.step)
        steady_theta = None
        if is_balanced(net):
            steady_theta = np.linalg.lstsq(lin.L, -lin.p, rcond=None)[0]
        for i, j in lines:
            series = flow_series(traj, net, i, j, "linear")
            ss = float(series[-1]) if steady_theta is None else float(
                net.flow_weight(i, j) * (steady_theta[j] - steady_theta[i]))
            rows.append(numeric_peak_row(net.line_label(i, j), traj.times, series, ss))

    line_docs = []
    for (i, j), row in zip(lines, rows):
        doc = _row_dict(row)
        doc["from"], doc["to"] = net.ids[i], net.ids[j]
        line_docs.append(doc)
    columns = ["line", "steady", "first_peak", "max", "linear_max"]
    if opts.validate:
        traj = integrate_nonlinear(net, horizon=horizon or default_horizon(lin.gamma), step=opts.step)
        for (i, j), doc in zip(lines, line_docs):
            doc["nonlinear_max"] = max_abs_flow_on_trajectory(traj, net, i, j, "linear")[1]
            doc["nonlinear_sine_max"] = max_abs_flow_on_trajectory(traj, net, i, j, "nonlinear")[1]
        columns.append("nonlinear_max")
    data["lines"] = line_docs
    table_rows = []
    for doc in line_docs:
        cells = [doc["label"], doc["steady_state"], doc["first_peak"], doc["max"], doc["linear_max"]]
        if opts.validate:
            cells.append(doc["nonlinear_max"])
        table_rows.append(cells)
    tables.append(Table("Line flows", columns, table_rows))
    warnings += _later_peak_warnings(rows)
    return AnalysisReport("analyze", data, tables, [], warnings)


# ---------------------------------------------------------------- symmetry


def partition_for(net: GridNetwork, lin: LinearizedSystem, node_cap: int | None = None):
    """User-supplied clusters if present, otherwise detected orbits; validated either way."""
    if net.clusters is not None:
        clusters = net.clusters
    else:
        kw = {} if node_cap is None else {"node_cap": node_cap}
        clusters = symmetry.find_orbits(net, **kw).clusters
    return symmetry.validate_partition(net, clusters, lin)


def symmetry_report(net: GridNetwork, opts: Options = Options(), node_cap: int | None = None):
    """Report plus the quotient network (for export)."""
    net, lin, mode, warnings = prepare(net, opts)
    part = partition_for(net, lin, node_cap)
    qs = symmetry.build_quotient(lin, part)
    full = modal.symmetrized_eig(lin.d_scale, lin.l_bar)
    quot = modal.symmetrized_eig(qs.d_scale, qs.l_bar)
    gap = symmetry.inherited_spectrum_gap(full.lam, quot.lam)
    respects = symmetry.respects_symmetries(lin.p, part)
    data = {
        "network": _network_summary(net, lin, mode),
        "clusters": part.labels(net.ids),
        "respects_symmetries": respects,
        "L_tilde": qs.L_tilde,
        "p_tilde": qs.p_tilde,
        "gamma_tilde": qs.gamma_tilde,
        "eigenvalues": full.lam,
        "quotient_eigenvalues": quot.lam,
        "inherited_spectrum_gap": gap,
        "inherited_spectrum_ok": gap <= 1e-8,
        "quotient_zero_mode_forcing": symmetry.quotient_zero_mode_forcing(qs),
    }
    tables = [Table("Clusters", ["cluster", "nodes", "size"],
                    [[str(k + 1), " ".join(c), str(len(c))] for k, c in enumerate(part.labels(net.ids))])]
    if lin.homogeneous:
        basis = modal.decompose(lin)
        split = symmetry.split_eigenvectors(basis, part, lin.p)
        data["nonredundant_eigenvalues"] = split.basis.lam[split.nonredundant]
        data["redundant_eigenvalues"] = split.basis.lam[split.redundant]
        data["q"] = split.basis.q
        data["q_tilde"] = modal.decompose(qs.as_linear_system()).q
        kinds = ["redundant" if k in set(split.redundant.tolist()) else "non-redundant"
                 for k in range(basis.n)]
        tables.append(Table("Full spectrum", ["mode", "lambda", "kind", "q"],
                            [[str(k + 1), float(split.basis.lam[k]), kinds[k], float(split.basis.q[k])]
                             for k in range(basis.n)]))
    tables.append(Table("Quotient", ["cluster", "p_tilde", "gamma_tilde"] +
                        [f"L~[{k + 1}]" for k in range(part.q)],
                        [[str(k + 1), float(qs.p_tilde[k]), float(qs.gamma_tilde[k])] +
                         [float(x) for x in qs.L_tilde[k]] for k in range(part.q)]))
    tables.append(Table("Quotient eigenvalues", ["mode", "lambda"],
                        [[str(k + 1), float(x)] for k, x in enumerate(quot.lam)]))
    notes = [f"respects symmetries: {'yes' if respects else 'no'}",
             f"inherited spectrum: max gap {gap:.2e} ({'ok' if gap <= 1e-8 else 'FAILED'})"]
    if not respects:
        notes.append("the power vector breaks the symmetry; run `swingsym deviations` "
                     "for the within-cluster deviations")
    report = AnalysisReport("symmetry", data, tables, notes, warnings)
    return report, symmetry.quotient_network(net, part)


# ---------------------------------------------------------------- deviations


def _cluster_mean_row(part: symmetry.SymmetryPartition, node: int) -> np.ndarray:
    k = part.node_map[node]
    members = list(part.clusters[k])
    row = np.zeros(part.n)
    row[members] = -1.0 / len(members)
    row[node] += 1.0
    return row


def deviation_report(net: GridNetwork, opts: Options = Options(), node: str | None = None,
                     node_cap: int | None = None) -> AnalysisReport:
    net, lin, mode, warnings = prepare(net, opts)
    part = partition_for(net, lin, node_cap)
    targets = [i for c in part.nontrivial for i in c]
    if node is not None:
        idx = net.index(node)
        targets = [idx]
    data = {"network": _network_summary(net, lin, mode), "clusters": part.labels(net.ids),
            "respects_symmetries": symmetry.respects_symmetries(lin.p, part)}
    tables, rows_all = [], []
    traj = None
    if opts.validate:
        traj = integrate_nonlinear(net, horizon=opts.horizon or default_horizon(lin.gamma),
                                   step=opts.step)

    def emit(title, rows, vectors):
        docs, cells = [], []
        for row, vec in zip(rows, vectors):
            doc = _row_dict(row)
            cell = [row.label, row.steady, row.first_peak, row.max_value, row.linear_max]
            if traj is not None:
                doc["nonlinear_max"] = max_abs_on_trajectory(traj, vec)[1]
                cell.append(doc["nonlinear_max"])
            docs.append(doc)
            cells.append(cell)
        columns = ["deviation", "steady", "first_peak", "max", "linear_max"]
        if traj is not None:
            columns.append("nonlinear_max")
        tables.append(Table(title, columns, cells))
        rows_all.extend(rows)
        return docs

    if node is None:
        dec = build_block_decomposition(lin, part, net.ids, tol=opts.tol)
        data["path"] = "block"
        blocks = []
        for block in dec.deviation_blocks:
            modes = block_modes(dec, block)
            rows = block_deviation_peaks(dec, block, opts.step, opts.horizon)
            doc = {
                "rows": [dec.row_labels[r] for r in block.rows],
                "clusters": [part.labels(net.ids)[k] for k in block.clusters],
                "kind": block.kind,
                "B": dec.B[np.ix_(block.rows, block.rows)],
                "r": dec.r[list(block.rows)],
                "xi": None if modes is None else modes.lam,
                "tau": None if modes is None else modes.q,
                "table": emit(f"Block {len(blocks) + 1} ({block.kind})", rows,
                              [dec.T[r] for r in block.rows]),
            }
            blocks.append(doc)
        data["blocks"] = blocks

    if lin.homogeneous:
        basis = modal.decompose(lin)
        split = symmetry.split_eigenvectors(basis, part, lin.p)
        rows = [deviation_peak(split, i, f"theta_{net.ids[i]}-mean", opts.step, opts.horizon)
                for i in targets]
        data.setdefault("path", "redundant-modes")
        data["redundant_forcing"] = split.basis.q[split.redundant]
    else:
        dec = build_block_decomposition(lin, part, net.ids, tol=opts.tol)
        rows = [node_deviation_from_block(dec, i, f"theta_{net.ids[i]}-mean", opts.step,
                                          opts.horizon).row for i in targets]
    data["nodes"] = emit("Node deviations from cluster mean", rows,
                         [_cluster_mean_row(part, i) for i in targets])
    warnings += _later_peak_warnings(rows_all)
    return AnalysisReport("deviations", data, tables, [], warnings)
