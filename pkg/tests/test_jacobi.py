import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swingsym.jacobi import jacobi_eigh


@pytest.mark.parametrize("n", [1, 2, 3, 7, 8, 31])
def test_matches_lapack(n):
    rng = np.random.default_rng(n)
    m = rng.normal(size=(n, n))
    s = m + m.T
    lam, v = jacobi_eigh(s)
    ref = np.linalg.eigvalsh(s)
    np.testing.assert_allclose(np.sort(lam), ref, atol=1e-11 * max(1, np.abs(ref).max()))
    np.testing.assert_allclose(v.T @ v, np.eye(n), atol=1e-12)
    np.testing.assert_allclose(s @ v, v * lam, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 12), seed=st.integers(0, 2**32 - 1), repeat=st.booleans())
def test_residuals_on_random_and_degenerate_input(n, seed, repeat):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    values = rng.normal(size=n)
    if repeat:
        values[: n // 2] = values[0]
    s = q @ np.diag(values) @ q.T
    lam, v = jacobi_eigh(s)
    np.testing.assert_allclose(np.sort(lam), np.sort(values), atol=1e-10)
    np.testing.assert_allclose(s @ v, v * lam, atol=1e-10)


def test_rejects_nonsymmetric():
    with pytest.raises(ValueError):
        jacobi_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_diagonal_input_is_returned_unchanged():
    lam, v = jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
    np.testing.assert_array_equal(lam, [3.0, -1.0, 2.0])
    np.testing.assert_array_equal(v, np.eye(3))
