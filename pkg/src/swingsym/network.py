"""Grid data model, file I/O and basic graph predicates."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .errors import NetworkFormatError


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DerivedParams:
    gamma: np.ndarray
    j_scale: np.ndarray
    p: np.ndarray
    A: np.ndarray


@dataclass(frozen=True, eq=False)
class GridNetwork:
    """Physical description of a grid.

    ``coupling`` holds the line weights Ã (symmetric unless ``directed``).
    ``multiplicity`` counts how many physical nodes a node stands for; it is 1
    everywhere except on exported quotient networks, where it makes the
    directed coupling symmetrizable (``m_i Ã_ij == m_j Ã_ji``).
    """

    ids: tuple[str, ...]
    coupling: np.ndarray
    power: np.ndarray
    inertia: np.ndarray
    damping_raw: np.ndarray
    ref_frequency: float = 1.0
    multiplicity: np.ndarray | None = None
    line_weight: np.ndarray | None = None
    directed: bool = False
    clusters: tuple[tuple[int, ...], ...] | None = None
    _derived: DerivedParams | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.ids)
        put = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        put("ids", tuple(str(i) for i in self.ids))
        if len(set(self.ids)) != n:
            raise NetworkFormatError("duplicate node ids")
        put("coupling", _frozen(self.coupling).reshape(n, n))
        for name in ("power", "inertia", "damping_raw"):
            arr = _frozen(getattr(self, name))
            if arr.shape != (n,):
                raise NetworkFormatError(f"{name} must have length {n}")
            put(name, arr)
        mult = np.ones(n) if self.multiplicity is None else self.multiplicity
        put("multiplicity", _frozen(mult))
        lw = self.coupling if self.line_weight is None else self.line_weight
        put("line_weight", _frozen(lw).reshape(n, n))
        put("ref_frequency", float(self.ref_frequency))
        self._validate()

    def _validate(self):
        a = self.coupling
        if not np.all(np.isfinite(a)) or np.any(a < 0):
            raise NetworkFormatError("coupling weights must be finite and >= 0")
        if np.any(np.diag(a) != 0):
            bad = self.ids[int(np.flatnonzero(np.diag(a))[0])]
            raise NetworkFormatError(f"self-loop on node {bad!r}")
        weighted = self.multiplicity[:, None] * a
        if self.directed:
            if not np.array_equal(a > 0, a.T > 0) or not np.allclose(
                weighted, weighted.T, rtol=1e-12, atol=1e-12
            ):
                raise NetworkFormatError(
                    "directed coupling must satisfy m_i*w_ij == m_j*w_ji"
                )
        elif not np.array_equal(a, a.T):
            i, j = np.argwhere(a != a.T)[0]
            raise NetworkFormatError(
                f"asymmetric coupling between {self.ids[i]!r} and {self.ids[j]!r}"
            )
        if np.any(self.inertia <= 0) or np.any(self.damping_raw <= 0):
            raise NetworkFormatError("inertia and damping must be > 0")
        if not self.ref_frequency > 0:
            raise NetworkFormatError("omega_r must be > 0")
        if np.any(self.multiplicity <= 0):
            raise NetworkFormatError("node multiplicity must be > 0")
        for name in ("power", "inertia", "damping_raw"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise NetworkFormatError(f"{name} must be finite")
        if self.clusters is not None:
            seen = sorted(i for c in self.clusters for i in c)
            if seen != list(range(self.n)):
                raise NetworkFormatError("clusters must partition the node set")

    @property
    def n(self) -> int:
        return len(self.ids)

    def derived(self) -> DerivedParams:
        if self._derived is None:
            gamma = self.damping_raw / (2.0 * self.inertia)
            j = self.ref_frequency / (2.0 * self.inertia)
            d = DerivedParams(
                gamma=_frozen(gamma),
                j_scale=_frozen(j),
                p=_frozen(j * self.power),
                A=_frozen(j[:, None] * self.coupling),
            )
            object.__setattr__(self, "_derived", d)
        return self._derived

    def index(self, node_id: str) -> int:
        try:
            return self.ids.index(str(node_id))
        except ValueError:
            raise KeyError(f"unknown node {node_id!r}") from None

    def lines(self) -> list[tuple[int, int]]:
        """Unordered lines (i < j) in index order."""
        support = (self.coupling > 0) | (self.coupling.T > 0)
        i, j = np.nonzero(np.triu(support, 1))
        return list(zip(i.tolist(), j.tolist()))

    def has_line(self, i: int, j: int) -> bool:
        return i != j and (self.coupling[i, j] > 0 or self.coupling[j, i] > 0)

    def flow_weight(self, i: int, j: int) -> float:
        if not self.has_line(i, j):
            raise KeyError(f"no line between {self.ids[i]!r} and {self.ids[j]!r}")
        w = self.line_weight[i, j] if self.line_weight[i, j] > 0 else self.line_weight[j, i]
        return float(w)

    def line_label(self, i: int, j: int) -> str:
        return f"theta_{self.ids[j]}-theta_{self.ids[i]}"

    def with_power(self, power: Sequence[float]) -> "GridNetwork":
        return _replace(self, power=np.asarray(power, dtype=float))

    def with_gamma(self, gamma: float | Sequence[float]) -> "GridNetwork":
        gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (self.n,))
        return _replace(self, damping_raw=2.0 * gamma * self.inertia)

    def cluster_indices(self) -> list[list[int]] | None:
        return None if self.clusters is None else [list(c) for c in self.clusters]


def _replace(net: GridNetwork, **changes) -> GridNetwork:
    kw = dict(
        ids=net.ids,
        coupling=net.coupling,
        power=net.power,
        inertia=net.inertia,
        damping_raw=net.damping_raw,
        ref_frequency=net.ref_frequency,
        multiplicity=net.multiplicity,
        line_weight=net.line_weight,
        directed=net.directed,
        clusters=net.clusters,
    )
    kw.update(changes)
    return GridNetwork(**kw)


def from_shorthand(
    coupling,
    power,
    gamma,
    j_scale=1.0,
    ids: Sequence[str] | None = None,
    **kw,
) -> GridNetwork:
    """Build a network from per-node damping γ and scaling J directly.

    Uses ω_R = 1, H = 1/(2J), D = 2γH, so that the derived γ and J are the
    ones supplied.
    """
    power = np.asarray(power, dtype=float)
    n = power.size
    j = np.broadcast_to(np.asarray(j_scale, dtype=float), (n,))
    g = np.broadcast_to(np.asarray(gamma, dtype=float), (n,))
    h = 1.0 / (2.0 * j)
    if ids is None:
        ids = [str(i + 1) for i in range(n)]
    return GridNetwork(
        ids=tuple(ids),
        coupling=np.asarray(coupling, dtype=float),
        power=power,
        inertia=h,
        damping_raw=2.0 * g * h,
        ref_frequency=1.0,
        **kw,
    )


def from_edges(
    n: int, edges: Sequence[tuple[int, int, float]] | Sequence[tuple[int, int]], **kw
) -> GridNetwork:
    """Convenience constructor from 0-based edge tuples (unit weight by default)."""
    a = np.zeros((n, n))
    for e in edges:
        i, j = e[0], e[1]
        w = e[2] if len(e) > 2 else 1.0
        a[i, j] = a[j, i] = w
    kw.setdefault("power", np.zeros(n))
    kw.setdefault("gamma", 1.0)
    return from_shorthand(a, **kw)


# ---------------------------------------------------------------- file format


def parse_network(doc: dict[str, Any]) -> GridNetwork:
    if not isinstance(doc, dict):
        raise NetworkFormatError("network document must be an object")
    try:
        omega_r = float(doc.get("omega_r", 1.0))
        directed = bool(doc.get("directed", False))
        nodes = doc["nodes"]
        edges = doc.get("edges", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise NetworkFormatError(f"malformed network document: {exc}") from exc
    if not isinstance(nodes, list) or not nodes:
        raise NetworkFormatError("'nodes' must be a non-empty list")

    ids: list[str] = []
    b, h, d, m = [], [], [], []
    for k, node in enumerate(nodes):
        try:
            nid = str(node["id"])
            b.append(float(node["b"]))
            if "h" in node or "d" in node:
                h.append(float(node["h"]))
                d.append(float(node["d"]))
            else:
                jj, gg = float(node["j"]), float(node["gamma"])
                if jj <= 0 or gg <= 0:
                    raise NetworkFormatError(f"node {nid!r}: gamma and j must be > 0")
                h.append(omega_r / (2.0 * jj))
                d.append(2.0 * gg * h[-1])
            m.append(float(node.get("n", 1.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise NetworkFormatError(f"node #{k}: {exc!r}") from exc
        ids.append(nid)
    index = {nid: k for k, nid in enumerate(ids)}
    if len(index) != len(ids):
        raise NetworkFormatError("duplicate node ids")

    n = len(ids)
    a = np.zeros((n, n))
    lw = np.zeros((n, n))
    seen: dict[tuple[int, int], float] = {}
    for k, e in enumerate(edges):
        try:
            i, j, w = index[str(e["a"])], index[str(e["b"])], float(e["w"])
            lwt = float(e.get("line_w", w))
        except KeyError as exc:
            raise NetworkFormatError(f"edge #{k}: unknown node or field {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise NetworkFormatError(f"edge #{k}: {exc}") from exc
        if i == j:
            raise NetworkFormatError(f"edge #{k}: self-loop on {ids[i]!r}")
        if not (w > 0 and np.isfinite(w)):
            raise NetworkFormatError(f"edge #{k}: weight must be > 0, got {w}")
        key = (i, j) if directed else (min(i, j), max(i, j))
        if key in seen:
            if seen[key] != w:
                raise NetworkFormatError(
                    f"asymmetric coupling between {ids[i]!r} and {ids[j]!r}"
                )
            raise NetworkFormatError(f"duplicate edge {ids[i]!r}-{ids[j]!r}")
        seen[key] = w
        a[i, j] = w
        lw[i, j] = lwt
        if not directed:
            a[j, i] = w
            lw[j, i] = lwt

    clusters = None
    if "clusters" in doc:
        try:
            clusters = tuple(tuple(index[str(x)] for x in c) for c in doc["clusters"])
        except (KeyError, TypeError) as exc:
            raise NetworkFormatError(f"bad clusters entry: {exc}") from exc

    return GridNetwork(
        ids=tuple(ids),
        coupling=a,
        power=np.array(b),
        inertia=np.array(h),
        damping_raw=np.array(d),
        ref_frequency=omega_r,
        multiplicity=np.array(m),
        line_weight=lw,
        directed=directed,
        clusters=clusters,
    )


def load_network(source) -> GridNetwork:
    """Load a network from a path, a JSON string, or an already-parsed dict."""
    if isinstance(source, dict):
        return parse_network(source)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise NetworkFormatError(f"cannot read {source}: {exc}") from exc
    else:
        text = source
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(f"invalid JSON: {exc}") from exc
    return parse_network(doc)


def network_to_dict(net: GridNetwork) -> dict[str, Any]:
    nodes = []
    for k, nid in enumerate(net.ids):
        node = {
            "id": nid,
            "b": float(net.power[k]),
            "h": float(net.inertia[k]),
            "d": float(net.damping_raw[k]),
        }
        if net.multiplicity[k] != 1.0:
            node["n"] = float(net.multiplicity[k])
        nodes.append(node)
    edges = []
    a, lw = net.coupling, net.line_weight
    for i in range(net.n):
        for j in range(net.n):
            if a[i, j] <= 0 or (not net.directed and j < i):
                continue
            e = {"a": net.ids[i], "b": net.ids[j], "w": float(a[i, j])}
            if lw[i, j] != a[i, j]:
                e["line_w"] = float(lw[i, j])
            edges.append(e)
    doc: dict[str, Any] = {"omega_r": net.ref_frequency}
    if net.directed:
        doc["directed"] = True
    doc["nodes"] = nodes
    doc["edges"] = edges
    if net.clusters is not None:
        doc["clusters"] = [[net.ids[i] for i in c] for c in net.clusters]
    return doc


def write_network(net: GridNetwork, path=None) -> str:
    text = json.dumps(network_to_dict(net), indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


# ---------------------------------------------------------------- predicates


def is_balanced(net: GridNetwork, tol: float | None = None) -> bool:
    b = net.power * net.multiplicity
    if tol is None:
        tol = 1e-12 * float(np.max(np.abs(net.power), initial=0.0)) * net.n
    return abs(float(np.sum(b))) <= tol


def connected_components(net: GridNetwork) -> list[list[int]]:
    support = (net.coupling > 0) | (net.coupling.T > 0)
    seen = np.zeros(net.n, dtype=bool)
    comps = []
    for start in range(net.n):
        if seen[start]:
            continue
        stack, comp = [start], []
        seen[start] = True
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in np.flatnonzero(support[v] & ~seen):
                seen[w] = True
                stack.append(int(w))
        comps.append(sorted(comp))
    return comps
