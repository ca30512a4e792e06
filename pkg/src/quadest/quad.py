"""Scaled second-order Taylor underestimators q(x) and the tightening ratio.

q(x) = f(x0) + grad f(x0).(x - x0) + (alpha/2) (x - x0)^T hess f(x0) (x - x0),
with alpha in [0, 1].  With alpha = 0 the model degenerates to the supporting
hyperplane at x0.
"""

from __future__ import annotations

import numpy as np

from .expr import Expression

#: relative seed for the curvature-denominator guard
DENOM_GUARD = 1e-12


class QuadraticUnderestimator:
    """Quadratic model anchored at x0 with cached value/gradient/Hessian.

    Immutable after construction except ``alpha``, which the tightening
    algorithm lowers under exclusive access.
    """

    def __init__(self, x0: np.ndarray, f0: float, g0: np.ndarray, h0: np.ndarray,
                 alpha: float = 1.0):
        self.x0 = np.asarray(x0, dtype=float)
        self.f0 = float(f0)
        self.g0 = np.asarray(g0, dtype=float)
        self.h0 = np.asarray(h0, dtype=float)
        self.alpha = float(alpha)
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")

    @property
    def dimension(self) -> int:
        return self.x0.size

    def evaluate(self, x, alpha: float | None = None):
        """q at a point (n,) or batch of points (m, n), at the given alpha."""
        a = self.alpha if alpha is None else alpha
        x = np.asarray(x, dtype=float)
        dx = x - self.x0
        if dx.ndim == 1:
            return self.f0 + float(self.g0 @ dx) + 0.5 * a * float(dx @ self.h0 @ dx)
        quad = np.einsum("ij,jk,ik->i", dx, self.h0, dx)
        return self.f0 + dx @ self.g0 + 0.5 * a * quad

    def linear_part(self, x):
        """The supporting hyperplane at x0 (q with alpha = 0)."""
        return self.evaluate(x, alpha=0.0)

    def curvature(self, x):
        """(x - x0)^T H0 (x - x0), the alpha-sensitivity of 2q at x."""
        x = np.asarray(x, dtype=float)
        dx = x - self.x0
        if dx.ndim == 1:
            return float(dx @ self.h0 @ dx)
        return np.einsum("ij,jk,ik->i", dx, self.h0, dx)

    def to_dict(self, lower_bound: float | None = None) -> dict:
        """JSON-ready payload so downstream tools can embed the model."""
        out = {
            "x0": self.x0.tolist(),
            "f0": self.f0,
            "g0": self.g0.tolist(),
            "H0": [float(v) for v in self.h0.reshape(-1)],  # row-major
            "alpha": self.alpha,
        }
        if lower_bound is not None:
            out["lower_bound"] = float(lower_bound)
        return out

    @classmethod
    def from_dict(cls, payload: dict) -> "QuadraticUnderestimator":
        x0 = np.asarray(payload["x0"], dtype=float)
        n = x0.size
        h0 = np.asarray(payload["H0"], dtype=float).reshape(n, n)
        return cls(x0, payload["f0"], payload["g0"], h0, payload["alpha"])


def build(f: Expression, x0) -> QuadraticUnderestimator:
    """Construct the model at x0 with alpha = 1, caching f, grad, Hessian."""
    x0 = np.asarray(x0, dtype=float)
    if x0.size != f.n_vars:
        raise ValueError(f"x0 has {x0.size} coordinates, function has {f.n_vars}")
    f0, g0, h0 = f.value_gradient_hessian(x0)
    return QuadraticUnderestimator(x0, f0, g0, h0, alpha=1.0)


def alpha_candidate(q: QuadraticUnderestimator, f: Expression, xv) -> float | None:
    """The alpha making q coincide with f at xv, clamped to [0, 1].

    Returns None when the curvature denominator vanishes (the hyperplane part
    alone already underestimates there, so no update applies).  The update is
    exact coincidence: no tolerance is folded into the numerator, so the
    returned model touches f at the last point that lowered alpha.
    """
    xv = np.asarray(xv, dtype=float)
    dx = xv - q.x0
    denom = float(dx @ q.h0 @ dx)
    guard = DENOM_GUARD * (1.0 + float(np.linalg.norm(q.h0)) * float(dx @ dx))
    if denom <= guard:
        return None
    num = 2.0 * (f.eval(xv) - (q.f0 + float(q.g0 @ dx)))
    return min(1.0, max(0.0, num / denom))
