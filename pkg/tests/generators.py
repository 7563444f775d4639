"""Random network generators shared by the property and acceptance tests."""

from __future__ import annotations

import numpy as np

from swingsym.network import GridNetwork, from_shorthand
from swingsym.symmetry import find_orbits

WEIGHTS = (0.5, 1.0, 1.5, 2.0)


def _random_tree_plus(rng, n, extra, weight):
    a = np.zeros((n, n))
    for v in range(1, n):
        u = int(rng.integers(0, v))
        a[u, v] = a[v, u] = weight()
    for _ in range(extra):
        u, v = rng.integers(0, n, 2)
        if u != v:
            a[u, v] = a[v, u] = weight()
    return a


def balanced(b, mult=None) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    m = np.ones_like(b) if mult is None else np.asarray(mult, dtype=float)
    return b - np.dot(m, b) / m.sum()


def feasible(a, b, max_angle=0.4) -> np.ndarray:
    """Scale powers so the DC-approximate angle differences stay below ``max_angle``."""
    lap = np.diag(a.sum(axis=1)) - a
    theta = np.linalg.pinv(lap) @ b
    i, j = np.nonzero(a)
    worst = float(np.max(np.abs(theta[j] - theta[i]), initial=0.0))
    return b if worst <= max_angle else b * (max_angle / worst)


def random_balanced_network(rng, n_max=12, gamma=None) -> GridNetwork:
    """Connected network, continuous weights, random J, balanced powers."""
    n = int(rng.integers(2, n_max + 1))
    a = _random_tree_plus(rng, n, int(rng.integers(0, n + 1)), lambda: rng.uniform(0.3, 2.0))
    j = rng.uniform(0.5, 2.0, n)
    b = feasible(a, balanced(rng.uniform(-0.3, 0.3, n)))
    g = rng.uniform(0.5, 2.0) if gamma is None else gamma
    return from_shorthand(a, b, g, j)


def _plant(rng, a, j, hub, copies, gadget_size):
    """Attach ``copies`` identical gadgets to ``hub``; returns the enlarged arrays."""
    n0 = a.shape[0]
    g = _random_tree_plus(rng, gadget_size, int(rng.integers(0, 2)),
                          lambda: float(rng.choice(WEIGHTS)))
    attach = rng.random(gadget_size) < 0.5
    attach[0] = True
    attach_w = rng.choice(WEIGHTS, gadget_size)
    role_j = rng.uniform(0.5, 2.0, gadget_size)
    n = n0 + copies * gadget_size
    out = np.zeros((n, n))
    out[:n0, :n0] = a
    jj = np.concatenate([j, np.tile(role_j, copies)])
    for c in range(copies):
        s = n0 + c * gadget_size
        out[s:s + gadget_size, s:s + gadget_size] = g
        for k in np.flatnonzero(attach):
            out[hub, s + k] = out[s + k, hub] = attach_w[k]
    return out, jj


def symmetric_network(rng, base_size, gadgets, gamma=1.0, continuous_base=True):
    """Random connected base plus planted copies of identical gadgets.

    ``gadgets`` is a list of (copies, gadget_size). Base nodes get continuous
    random J so that only planted symmetries survive.
    """
    if continuous_base:
        weight = lambda: rng.uniform(0.3, 2.0)  # noqa: E731
    else:
        weight = lambda: float(rng.choice(WEIGHTS))  # noqa: E731
    a = _random_tree_plus(rng, base_size, int(rng.integers(0, base_size + 1)), weight)
    j = rng.uniform(0.5, 2.0, base_size)
    hubs = rng.choice(base_size, size=len(gadgets), replace=len(gadgets) > base_size)
    for hub, (copies, size) in zip(hubs, gadgets):
        a, j = _plant(rng, a, j, int(hub), copies, size)
    n = a.shape[0]
    return from_shorthand(a, np.zeros(n), gamma, j)


def orbit_power(rng, net: GridNetwork, part=None) -> tuple[GridNetwork, object]:
    """Balanced powers that are constant on every orbit."""
    part = find_orbits(net) if part is None else part
    b = np.zeros(net.n)
    for c in part.clusters:
        b[list(c)] = rng.uniform(-0.3, 0.3)
    return net.with_power(feasible(net.coupling, balanced(b, net.multiplicity))), part


def break_power(rng, net: GridNetwork, part) -> GridNetwork:
    """Balanced powers with a perturbation inside the first nontrivial orbit."""
    b = np.array(net.power)
    c = part.nontrivial[0]
    b[c[0]] += 0.1
    b[c[-1]] -= 0.1
    return net.with_power(feasible(net.coupling, b))


def random_combination(rng):
    """Mode combination drawn from the fixed distribution used for peak checks."""
    from swingsym.peaks import ModeCombination

    gamma = rng.uniform(0.5, 3.0)
    m = int(rng.integers(3, 8))
    omega = rng.uniform(1.1 * gamma / 2, gamma / 2 + 3.0, m)
    return ModeCombination(rng.normal(size=m), rng.normal(size=m), omega, gamma / 2)
