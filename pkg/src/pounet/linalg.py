"""Dense matrices and ridge-regularized least-squares solves.

Solver policy: for ridge weight lam > 0 the solve goes through a
column-pivoted QR factorization of the augmented system [A; sqrt(lam) I],
which always has full column rank. The unregularized solve (lam == 0) uses
an SVD with singular values below ``SV_RELATIVE_CUTOFF * sigma_max``
truncated, which returns the minimum-norm solution when A is rank
deficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

# Relative singular-value cutoff for the lam == 0 path.
SV_RELATIVE_CUTOFF = 1e-12


@dataclass(frozen=True)
class DenseMatrix:
    """Row-major float64 matrix whose entries are finite by construction."""

    data: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(self.data, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError(f"DenseMatrix requires a 2-D array, got ndim={a.ndim}")
        if not np.isfinite(a).all():
            raise ValueError("DenseMatrix entries must all be finite")
        object.__setattr__(self, "data", a)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def entries(self) -> np.ndarray:
        """Flat row-major view of the entries."""
        return self.data.ravel()

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.data))


def matmul(a: DenseMatrix, b: DenseMatrix) -> DenseMatrix:
    """Matrix product a @ b; raises on inner-dimension mismatch."""
    if a.cols != b.rows:
        raise ValueError(f"matmul dimension mismatch: {a.rows}x{a.cols} @ {b.rows}x{b.cols}")
    return DenseMatrix(a.data @ b.data)


def solve_least_squares(a: DenseMatrix, y: np.ndarray, lam: float = 0.0) -> np.ndarray:
    """Minimize ||A c - y||^2 + lam * ||c||^2 over c.

    For lam == 0 the minimum-norm minimizer is returned, with singular
    values below ``SV_RELATIVE_CUTOFF * sigma_max`` treated as zero.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if a.rows < 1 or a.cols < 1:
        raise ValueError("least-squares system must have at least one row and one column")
    if y.shape[0] != a.rows:
        raise ValueError(f"rhs length {y.shape[0]} does not match {a.rows} rows")
    if not np.isfinite(y).all():
        raise ValueError("least-squares rhs must be finite")
    if not np.isfinite(lam) or lam < 0.0:
        raise ValueError(f"ridge weight must be finite and nonnegative, got {lam}")

    if lam == 0.0:
        sol, _, _, _ = np.linalg.lstsq(a.data, y, rcond=SV_RELATIVE_CUTOFF)
        return sol

    k = a.cols
    aug = np.vstack([a.data, np.sqrt(lam) * np.eye(k)])
    rhs = np.concatenate([y, np.zeros(k)])
    sol, _, _, _ = scipy.linalg.lstsq(aug, rhs, lapack_driver="gelsy")
    return sol
