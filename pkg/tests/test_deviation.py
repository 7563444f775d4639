import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from generators import break_power, orbit_power, symmetric_network
from swingsym import example_path, load_network
from swingsym.deviation import (
    block_deviation_peaks,
    block_modes,
    block_trajectory,
    build_block_decomposition,
    deviation_combination,
    deviation_peak,
    deviation_trajectory,
    helmert_label,
    helmert_rows,
    node_deviation_from_block,
)
from swingsym.errors import SymmetryError
from swingsym.linearization import linearize
from swingsym.modal import decompose
from swingsym.simulate import integrate_linear
from swingsym.symmetry import find_orbits, split_eigenvectors


def cluster_deviation(theta, part):
    out = np.empty_like(theta)
    for c in part.clusters:
        c = list(c)
        out[c] = theta[c] - theta[c].mean(axis=0)
    return out


@pytest.mark.parametrize("size", [2, 3, 5])
def test_helmert_rows_are_orthonormal_and_zero_sum(size):
    h = helmert_rows(size)
    np.testing.assert_allclose(h @ h.T, np.eye(size - 1), atol=1e-14)
    np.testing.assert_allclose(h.sum(axis=1), 0.0, atol=1e-14)
    ids = ["a", "b", "c", "d", "e"]
    assert helmert_label([0, 1], 1, ids) == "(theta_b-theta_a)/sqrt2"
    assert helmert_label([0, 1, 2], 2, ids) == "(2*theta_c-(theta_a+theta_b))/sqrt6"


def test_mixed_damping_blocks():
    net = load_network(example_path("star7_mixed_damping"))
    lin = linearize(net, "zero")
    part = find_orbits(net)
    dec = build_block_decomposition(lin, part, net.ids)
    np.testing.assert_allclose(dec.T @ dec.T.T, np.eye(7), atol=1e-14)
    assert [b.kind for b in dec.deviation_blocks] == ["intertwined"]
    for block in dec.deviation_blocks:
        rows = list(block.rows)
        np.testing.assert_allclose(dec.B[np.ix_(rows, rows)], [[-2, 1], [1, -1]], atol=1e-14)
        modes = block_modes(dec, block)
        np.testing.assert_allclose(np.sort(modes.lam), [-(3 + np.sqrt(5)) / 2, -(3 - np.sqrt(5)) / 2],
                                   atol=1e-12)
    # reconstruct θ from block coordinates and compare with direct integration
    traj = integrate_linear(lin, horizon=10.0, step=1e-3, stride=200)
    xi = block_trajectory(dec, traj.times)
    np.testing.assert_allclose(dec.T.T @ xi, traj.theta, atol=1e-8)


def test_block_rows_match_trajectory_extrema():
    net = load_network(example_path("star7_mixed_damping"))
    lin = linearize(net, "zero")
    dec = build_block_decomposition(lin, find_orbits(net), net.ids)
    traj = integrate_linear(lin, horizon=40.0, step=1e-3)
    for block in dec.deviation_blocks:
        for r, row in zip(block.rows, block_deviation_peaks(dec, block)):
            series = dec.T[r] @ traj.theta
            assert row.steady == pytest.approx(series[-1], abs=1e-6)
            assert abs(row.linear_max) == pytest.approx(np.max(np.abs(series)), abs=1e-6)
            if row.peak_found:
                k = int(round(row.first_peak_time / 1e-3))
                assert row.first_peak == pytest.approx(series[k], abs=1e-6)


def test_non_equitable_partition_is_rejected():
    net = load_network(example_path("star7"))
    lin = linearize(net, "zero")
    from swingsym.symmetry import SymmetryPartition

    bad = SymmetryPartition(((0, 1), (2, 3), (4, 5, 6)), 7)
    with pytest.raises(SymmetryError):
        build_block_decomposition(lin, bad)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_deviation_vanishes_for_respecting_power(seed):
    rng = np.random.default_rng(seed)
    net = symmetric_network(rng, int(rng.integers(2, 5)), [(int(rng.integers(2, 4)), 2)])
    net, part = orbit_power(rng, net)
    lin = linearize(net, "zero")
    split = split_eigenvectors(decompose(lin), part)
    t = np.linspace(0, 20, 201)
    assert np.max(np.abs(deviation_trajectory(split, t))) <= 1e-8


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_deviation_matches_simulation_when_symmetry_is_broken(seed):
    rng = np.random.default_rng(seed)
    net = symmetric_network(rng, int(rng.integers(2, 5)), [(int(rng.integers(2, 4)), 2)])
    net, part = orbit_power(rng, net)
    net = break_power(rng, net, part)
    lin = linearize(net, "zero")
    split = split_eigenvectors(decompose(lin), part, lin.p)
    traj = integrate_linear(lin, horizon=8.0, step=1e-3, stride=100)
    eps = cluster_deviation(traj.theta, part)
    np.testing.assert_allclose(deviation_trajectory(split, traj.times), eps, atol=1e-8)
    node = part.nontrivial[0][0]
    comb = deviation_combination(split, node)
    np.testing.assert_allclose(comb.value(traj.times), eps[node], atol=1e-8)
    row = deviation_peak(split, node)
    assert row.steady == pytest.approx(comb.ss_value)
    dec = build_block_decomposition(lin, part, net.ids)
    nd = node_deviation_from_block(dec, node)
    np.testing.assert_allclose(nd.combination.value(traj.times), eps[node], atol=1e-8)


def test_star_cluster_with_one_off_power_node():
    from swingsym.network import from_shorthand
    from swingsym.peaks import dense_scan_max

    a = np.zeros((7, 7))
    a[0, 1:] = a[1:, 0] = 1.0
    b = np.full(7, -0.05)
    b[0] = 0.3
    b[3] += 0.04
    b -= b.mean()
    net = from_shorthand(a, b, 0.6)
    lin = linearize(net, "zero")
    part = find_orbits(net)
    assert [list(c) for c in part.clusters] == [[0], [1, 2, 3, 4, 5, 6]]
    split = split_eigenvectors(decompose(lin), part, lin.p)
    for node in range(1, 7):
        row = deviation_peak(split, node)
        _, scan = dense_scan_max(deviation_combination(split, node), step=1e-4, horizon=60)
        assert abs(row.max_value - scan) <= 1e-6


def test_two_node_cluster_reduces_to_single_mode():
    from swingsym.network import from_shorthand

    a = np.array([[0, 1.0, 1.0], [1.0, 0, 0], [1.0, 0, 0]])
    net = from_shorthand(a, [0.0, 0.1, -0.1], 0.5)
    lin = linearize(net, "zero")
    part = find_orbits(net.with_power(np.zeros(3)))
    split = split_eigenvectors(decompose(lin), part, lin.p)
    comb = deviation_combination(split, 1)
    assert comb.size == 1
    omega, zeta = comb.omega[0], comb.zeta[0]
    r = np.sqrt(1 - zeta**2)
    row = deviation_peak(split, 1)
    assert row.first_peak_time == pytest.approx(np.pi / (omega * r), abs=1e-12)
    expected = comb.coeffs[0] * comb.q[0] / omega**2 * (1 + np.exp(-np.pi * zeta / r))
    assert row.first_peak == pytest.approx(expected, abs=1e-12)


def test_singleton_partition_block_is_identity():
    from swingsym.symmetry import singleton_partition

    net = load_network(example_path("bottleneck7"))
    lin = linearize(net, "zero")
    dec = build_block_decomposition(lin, singleton_partition(7))
    np.testing.assert_array_equal(dec.T, np.eye(7))
    np.testing.assert_allclose(dec.B, lin.L, atol=0)
    assert [b.kind for b in dec.blocks] == ["quotient"]
