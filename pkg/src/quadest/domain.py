"""Box domains: per-coordinate lower/upper bounds."""

from __future__ import annotations

from itertools import product

import numpy as np


class BoxDomain:
    """Axis-aligned box given by finite per-coordinate bounds lo < hi."""

    def __init__(self, lower, upper):
        lo = np.asarray(lower, dtype=float)
        hi = np.asarray(upper, dtype=float)
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ValueError("lower and upper bounds must be 1-D and of equal length")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValueError("box bounds must be finite")
        bad = np.nonzero(lo >= hi)[0]
        if bad.size:
            i = int(bad[0])
            raise ValueError(f"degenerate interval in coordinate {i}: [{lo[i]}, {hi[i]}]")
        self.lower = lo
        self.upper = hi

    @classmethod
    def from_pairs(cls, pairs) -> "BoxDomain":
        """Build from a sequence of (lo, hi) pairs."""
        pairs = list(pairs)
        return cls([p[0] for p in pairs], [p[1] for p in pairs])

    @property
    def dimension(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        slack = tol * (1.0 + np.abs(self.widths))
        return bool(np.all(x >= self.lower - slack) and np.all(x <= self.upper + slack))

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def corners(self) -> np.ndarray:
        """All 2^d corner points, one per row."""
        cols = [(self.lower[i], self.upper[i]) for i in range(self.dimension)]
        return np.array(list(product(*cols)), dtype=float)

    def __repr__(self):
        spans = ", ".join(f"[{lo}, {hi}]" for lo, hi in zip(self.lower, self.upper))
        return f"BoxDomain({spans})"

    def __eq__(self, other):
        if not isinstance(other, BoxDomain):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)
