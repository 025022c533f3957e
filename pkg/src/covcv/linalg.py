"""Dense symmetric linear algebra used by the estimators and solvers.

Matrices are plain ``numpy`` arrays. :func:`symmetric` is the single entry
point that turns an arbitrary square array into an exactly symmetric,
read-only one; everything downstream assumes that contract.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.linalg import lapack

__all__ = [
    "EigenDecomposition",
    "LinAlgFailure",
    "NotPositiveDefinite",
    "frobenius_norm_sq",
    "min_eigenvalue",
    "spd_solve",
    "sym_eigen",
    "symmetric",
]

#: Relative asymmetry accepted by :func:`symmetric` before it refuses.
SYMMETRY_RTOL = 1e-8


class LinAlgFailure(ArithmeticError):
    """Raised when a decomposition cannot be completed."""


class NotPositiveDefinite(LinAlgFailure):
    """Cholesky hit a non-positive pivot.

    ``pivot`` is the zero-based index of the failing leading minor.
    """

    def __init__(self, pivot: int, msg: str | None = None):
        self.pivot = pivot
        super().__init__(msg or f"matrix is not positive definite (pivot {pivot})")


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # column i pairs with eigenvalues[i]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return symmetric((v * self.eigenvalues) @ v.T)


def symmetric(a, rtol: float = SYMMETRY_RTOL) -> np.ndarray:
    """Return an exactly symmetric, read-only float copy of ``a``.

    Tiny asymmetries from floating point arithmetic are averaged away;
    anything larger than ``rtol`` relative to the largest entry is an error.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    scale = max(np.abs(a).max(initial=0.0), 1.0)
    if np.abs(a - a.T).max(initial=0.0) > rtol * scale:
        raise ValueError("matrix is not symmetric")
    out = 0.5 * (a + a.T)
    out.setflags(write=False)
    return out


def sym_eigen(a) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending."""
    a = symmetric(a)
    # LAPACK syevd via numpy: deterministic for a fixed input and thread count.
    try:
        lam, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.norm(a, 1)
        raise LinAlgFailure(
            f"eigensolver did not converge (n={a.shape[0]}, ||A||_1={cond:.3e})"
        ) from exc
    return EigenDecomposition(lam, v)


def spd_solve(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric positive definite ``a`` via Cholesky."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    c, info = lapack.dpotrf(a, lower=True, clean=True, overwrite_a=False)
    if info > 0:
        raise NotPositiveDefinite(info - 1)
    if info < 0:
        raise ValueError(f"invalid argument {-info} to dpotrf")
    x, info = lapack.dpotrs(c, b, lower=True)
    if info != 0:
        raise LinAlgFailure(f"dpotrs failed with info={info}")
    return x


def cholesky_logdet(a) -> float:
    """``log|a|`` for positive definite ``a``; avoids det() overflow."""
    c, info = lapack.dpotrf(np.asarray(a, dtype=float), lower=True, clean=True)
    if info > 0:
        raise NotPositiveDefinite(info - 1)
    return 2.0 * float(np.sum(np.log(np.diag(c))))


def frobenius_norm_sq(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.einsum("ij,ij->", a, a))


def min_eigenvalue(a) -> float:
    return float(sym_eigen(a).eigenvalues[0])
