# src/engine/linalg.py
"""
Dense matrix helpers and a cyclic Jacobi eigensolver for symmetric
matrices (covariance whitening).

All functions are pure: inputs are never modified.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ConvergenceError, DimensionError
from .types import Matrix, Vector

DEFAULT_TOL = 1e-10
DEFAULT_MAX_SWEEPS = 100
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: Vector    # descending
    eigenvectors: Matrix   # column j pairs with eigenvalue j
    sweeps: int = 0

    def reconstruct(self) -> Matrix:
        p = self.eigenvectors
        return (p * self.eigenvalues) @ p.T


def as_matrix(a) -> Matrix:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got ndim={m.ndim}")
    return m


def _check_finite(m: Matrix, what: str) -> Matrix:
    if not np.all(np.isfinite(m)):
        raise ArgumentError(f"{what} contains NaN or Inf")
    return m


def matmul(a: Matrix, b: Matrix) -> Matrix:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return _check_finite(a @ b, "matmul result")


def off_diagonal_norm(m: Matrix) -> float:
    off = m - np.diag(np.diag(m))
    return float(np.sqrt(np.sum(off * off)))


def _fix_signs(vecs: Matrix) -> Matrix:
    # largest-magnitude entry of each column is made positive
    out = vecs.copy()
    pivots = np.argmax(np.abs(out), axis=0)
    signs = np.sign(out[pivots, np.arange(out.shape[1])])
    signs[signs == 0] = 1.0
    return out * signs


def jacobi_eigh(
    sym: Matrix,
    tol: float = DEFAULT_TOL,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> EigenDecomposition:
    """
    Cyclic Jacobi rotations on a symmetric matrix.

    Stops once the off-diagonal Frobenius norm drops below
    tol * max(1, ||sym||_F). Eigenvalues come back sorted descending,
    each eigenvector column signed so its largest-magnitude entry is
    positive.
    """
    a = as_matrix(sym)
    n, m = a.shape
    if n != m:
        raise ArgumentError(f"jacobi_eigh needs a square matrix, got {a.shape}")
    if n == 0:
        raise ArgumentError("jacobi_eigh needs a non-empty matrix")
    _check_finite(a, "input matrix")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > SYMMETRY_TOL * scale:
        raise ArgumentError("jacobi_eigh needs a symmetric matrix")
    if tol <= 0 or max_sweeps < 1:
        raise ArgumentError("tol must be > 0 and max_sweeps >= 1")

    a = (a + a.T) / 2.0
    v = np.eye(n)
    threshold = tol * max(1.0, float(np.linalg.norm(a)))

    sweeps = 0
    while off_diagonal_norm(a) >= threshold:
        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"jacobi_eigh did not converge in {max_sweeps} sweeps "
                f"(off-diagonal norm {off_diagonal_norm(a):.3e})"
            )
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q

                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q

                a[p, q] = 0.0
                a[q, p] = 0.0

                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq

    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    return EigenDecomposition(
        eigenvalues=values[order],
        eigenvectors=_fix_signs(v[:, order]),
        sweeps=sweeps,
    )
