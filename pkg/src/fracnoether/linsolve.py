"""Dense linear solves for the small systems this package needs.

Gaussian elimination with partial pivoting, sized for mechanical systems
with a handful of degrees of freedom.  A pivot falling below
``pivot_rtol`` times the matrix magnitude is treated as singular.
"""

from __future__ import annotations

import numpy as np


class SingularMatrixError(ArithmeticError):
    """Pivot below the relative threshold; carries a condition estimate."""

    def __init__(self, message: str, condition_estimate: float):
        super().__init__(message)
        self.condition_estimate = condition_estimate


def solve(matrix, rhs, pivot_rtol: float = 1e-12) -> np.ndarray:
    """Solve ``matrix @ x = rhs`` by partial-pivoting elimination."""
    a = np.array(matrix, dtype=float)
    b = np.array(rhs, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"shape mismatch: matrix {a.shape}, rhs {b.shape}")
    scale = np.max(np.abs(a)) if n else 0.0
    threshold = pivot_rtol * max(scale, 1e-300)

    for col in range(n):
        pivot_row = col + int(np.argmax(np.abs(a[col:, col])))
        pivot = a[pivot_row, col]
        if abs(pivot) < threshold:
            estimate = scale / max(abs(pivot), 1e-300)
            raise SingularMatrixError(
                f"singular system: pivot {pivot:.3e} below {threshold:.3e}",
                condition_estimate=estimate,
            )
        if pivot_row != col:
            a[[col, pivot_row]] = a[[pivot_row, col]]
            b[[col, pivot_row]] = b[[pivot_row, col]]
        for row in range(col + 1, n):
            factor = a[row, col] / pivot
            if factor != 0.0:
                a[row, col:] -= factor * a[col, col:]
                b[row] -= factor * b[col]

    x = np.empty(n)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - a[row, row + 1 :] @ x[row + 1 :]) / a[row, row]
    return x
