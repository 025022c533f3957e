from __future__ import annotations

from typing import Any

import numpy as np

from ..linalg import EigenDecomposition, symmetric

METHODS = ("Sample", "LW1", "LWCC", "LWNL", "POET", "GLASSO")


class CovarianceEstimate:
    """An estimated covariance matrix and how it was produced.

    Spectral estimators may pass only ``eig``; the dense matrix is then
    assembled on first access. Portfolio and cross-validation code use
    ``eig`` directly when it is present, which keeps large parameter grids
    cheap.
    """

    __slots__ = ("_matrix", "method", "parameter", "meta", "eig")

    def __init__(
        self,
        matrix: np.ndarray | None,
        method: str,
        parameter: float | int | None = None,
        meta: dict[str, Any] | None = None,
        eig: EigenDecomposition | None = None,
    ):
        if method not in METHODS:
            raise ValueError(f"unknown estimation method {method!r}")
        if matrix is None and eig is None:
            raise ValueError("need a matrix or an eigendecomposition")
        if matrix is not None:
            m = matrix
            if not (isinstance(m, np.ndarray) and not m.flags.writeable and np.array_equal(m, m.T)):
                m = symmetric(m)
            if np.any(np.diag(m) < 0):
                raise ValueError("covariance estimate has a negative variance")
            matrix = m
        self._matrix = matrix
        self.method = method
        self.parameter = parameter
        self.meta = dict(meta or {})
        self.eig = eig

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = self.eig.reconstruct()
        return self._matrix

    @property
    def n(self) -> int:
        if self._matrix is not None:
            return self._matrix.shape[0]
        return self.eig.eigenvalues.shape[0]

    def __repr__(self):
        return f"CovarianceEstimate(method={self.method!r}, parameter={self.parameter!r}, n={self.n})"
