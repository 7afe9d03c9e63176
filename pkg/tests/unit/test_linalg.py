import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from src.engine.errors import ArgumentError, ConvergenceError, DimensionError
from src.engine.linalg import jacobi_eigh, matmul, off_diagonal_norm


def _random_symmetric(n: int, seed: int) -> np.ndarray:
    b = np.random.default_rng(seed).standard_normal((n, n))
    return (b + b.T) / 2.0


def test_diagonal_matrix_sorted_descending():
    eig = jacobi_eigh(np.diag([1.0, 3.0, 2.0]))
    assert_allclose(eig.eigenvalues, [3.0, 2.0, 1.0])
    assert eig.sweeps == 0
    # columns are unit vectors e1, e2, e0 with positive signs
    assert_allclose(eig.eigenvectors, [[0, 0, 1], [1, 0, 0], [0, 1, 0]])


def test_two_by_two_known_pair():
    eig = jacobi_eigh(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert_allclose(eig.eigenvalues, [3.0, 1.0], atol=1e-12)
    assert_allclose(eig.eigenvectors[:, 0], [2 ** -0.5, 2 ** -0.5], atol=1e-12)
    assert_allclose(np.abs(eig.eigenvectors[:, 1]), [2 ** -0.5, 2 ** -0.5], atol=1e-12)
    # largest-magnitude entry positive; on a tie the first one wins
    assert eig.eigenvectors[0, 1] > 0


def test_one_by_one():
    eig = jacobi_eigh(np.array([[4.5]]))
    assert_allclose(eig.eigenvalues, [4.5])
    assert_allclose(eig.eigenvectors, [[1.0]])


@pytest.mark.parametrize("n", [3, 6, 10])
def test_matches_numpy_eigvalsh(n):
    a = _random_symmetric(n, seed=n)
    eig = jacobi_eigh(a)
    assert_allclose(eig.eigenvalues, np.sort(np.linalg.eigvalsh(a))[::-1], atol=1e-8)
    assert_allclose(eig.eigenvectors.T @ eig.eigenvectors, np.eye(n), atol=1e-8)
    assert_allclose(eig.reconstruct(), a, atol=1e-8)


def test_input_not_modified():
    a = _random_symmetric(5, seed=1)
    before = a.copy()
    jacobi_eigh(a)
    np.testing.assert_array_equal(a, before)


def test_sign_convention():
    eig = jacobi_eigh(_random_symmetric(7, seed=2))
    v = eig.eigenvectors
    pivots = np.argmax(np.abs(v), axis=0)
    assert np.all(v[pivots, np.arange(7)] > 0)


@pytest.mark.parametrize(
    "bad",
    [
        np.array([[1.0, 2.0], [0.0, 1.0]]),           # asymmetric
        np.ones((2, 3)),                               # not square
        np.zeros((0, 0)),                              # empty
        np.array([[1.0, np.nan], [np.nan, 1.0]]),      # non-finite
    ],
)
def test_rejects_bad_input(bad):
    with pytest.raises(ArgumentError):
        jacobi_eigh(bad)


def test_rejects_bad_tolerance():
    with pytest.raises(ArgumentError):
        jacobi_eigh(np.eye(2), tol=0.0)
    with pytest.raises(ArgumentError):
        jacobi_eigh(np.eye(2), max_sweeps=0)


def test_sweep_budget_exhausted():
    with pytest.raises(ConvergenceError):
        jacobi_eigh(_random_symmetric(8, seed=3), tol=1e-14, max_sweeps=1)


def test_convergence_error_is_arithmetic():
    with pytest.raises(ArithmeticError):
        jacobi_eigh(_random_symmetric(8, seed=3), tol=1e-14, max_sweeps=1)


def test_matmul_identity():
    a = np.random.default_rng(0).standard_normal((3, 4))
    assert_allclose(matmul(np.eye(3), a), a, rtol=0, atol=0)


def test_matmul_small_product():
    out = matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[0.0], [1.0]]))
    assert out.shape == (2, 1)
    assert_allclose(out, [[2.0], [4.0]])


def test_matmul_matches_triple_loop():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((4, 3)), rng.standard_normal((3, 5))
    expected = np.zeros((4, 5))
    for i in range(4):
        for j in range(5):
            for k in range(3):
                expected[i, j] += a[i, k] * b[k, j]
    out = matmul(a, b)
    assert out.shape == (4, 5)
    assert_allclose(out, expected, rtol=0, atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_matmul_associative(seed):
    rng = np.random.default_rng(seed)
    p, q, r, s = (int(v) for v in rng.integers(1, 7, size=4))
    a, b, c = rng.standard_normal((p, q)), rng.standard_normal((q, r)), rng.standard_normal((r, s))
    assert_allclose(matmul(matmul(a, b), c), matmul(a, matmul(b, c)), rtol=0, atol=1e-9)


def test_matmul_shape_mismatch():
    with pytest.raises(DimensionError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_matmul_overflow_rejected():
    with np.errstate(over="ignore"):
        with pytest.raises(ArgumentError):
            matmul(np.array([[1e308]]), np.array([[10.0]]))


def test_off_diagonal_norm():
    assert off_diagonal_norm(np.array([[5.0, 3.0], [4.0, 9.0]])) == pytest.approx(5.0)


_entries = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_subnormal=False)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=6).flatmap(lambda n: arrays(np.float64, (n, n), elements=_entries)))
def test_property_reconstruction_and_orthonormality(b):
    a = (b + b.T) / 2.0
    eig = jacobi_eigh(a)
    n = a.shape[0]
    assert np.all(np.diff(eig.eigenvalues) <= 0)
    assert_allclose(eig.eigenvectors.T @ eig.eigenvectors, np.eye(n), atol=1e-8)
    assert_allclose(eig.reconstruct(), a, atol=1e-7)


def test_random_symmetric_matrices_up_to_20():
    for seed in range(100):
        n = 1 + seed % 20
        a = _random_symmetric(n, seed)
        eig = jacobi_eigh(a)
        assert np.max(np.abs(eig.eigenvectors.T @ eig.eigenvectors - np.eye(n))) < 1e-8
        assert np.max(np.abs(eig.reconstruct() - a)) < 1e-8
