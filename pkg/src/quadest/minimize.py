"""Box-constrained convex minimization by projected gradient descent.

Used to find the floor of the epigraph box (min of f over the domain) and its
constrained variant.  Smooth convex objectives in a handful of variables make
a first-order method with backtracking and multi-start entirely sufficient;
feasibility under extra halfspaces is handled by alternating projections onto
the box and each halfspace.
"""

from __future__ import annotations

import numpy as np

from .domain import BoxDomain
from .expr import Expression

_MAX_ITERS = 5000
_PROJECTION_SWEEPS = 100


def project_feasible(x: np.ndarray, box: BoxDomain, halfspaces=()) -> np.ndarray:
    """Approximate projection onto box intersect {a.x + b <= 0} constraints."""
    x = box.clip(x)
    if not halfspaces:
        return x
    for _ in range(_PROJECTION_SWEEPS):
        moved = False
        for h in halfspaces:
            viol = float(h.normal @ x + h.offset)
            if viol > 1e-12:
                x = x - (viol / float(h.normal @ h.normal)) * h.normal
                moved = True
        clipped = box.clip(x)
        if np.any(clipped != x):
            x = clipped
            moved = True
        if not moved:
            return x
    return x


def _descend(f: Expression, x: np.ndarray, box: BoxDomain, halfspaces, tol: float):
    fx = f.eval(x)
    step = 1.0
    for _ in range(_MAX_ITERS):
        g = f.gradient(x)
        moved = False
        # backtracking on the projected step until the value decreases
        s = step
        for _ in range(60):
            trial = project_feasible(x - s * g, box, halfspaces)
            try:
                f_trial = f.eval(trial)
            except ValueError:
                f_trial = np.inf  # projection tolerance strayed out of dom(f)
            if f_trial < fx - 1e-16 * (1.0 + abs(fx)):
                progress = fx - f_trial
                x, fx = trial, f_trial
                step = min(s * 2.0, 1e12)
                moved = True
                break
            s *= 0.5
        if not moved:
            break
        if progress <= tol * (1.0 + abs(fx)):
            break
    return x, fx


def certified_floor(f: Expression, x, vertices: np.ndarray) -> float:
    """A guaranteed lower bound on min f over a polytope, anchored at x.

    By convexity f(y) >= f(x) + grad f(x).(y - x) on the polytope, and the
    linear side attains its minimum at one of the given vertices.  At a
    near-optimal feasible x the correction is negligible; at a poor x the
    bound is loose but never above the true minimum.
    """
    x = np.asarray(x, dtype=float)
    g = f.gradient(x)
    corr = float(np.min((np.asarray(vertices, dtype=float) - x) @ g))
    return f.eval(x) + min(corr, 0.0)


def minimize_on_box(f: Expression, box: BoxDomain, halfspaces=(), tol: float = 1e-8,
                    extra_starts=()):
    """Multi-start projected descent; returns (argmin, min value).

    Starts from the domain center and every box corner (plus any extra
    starts), so flat directions and boundary minima are covered for the small
    dimensions this library targets.
    """
    starts = [box.center()]
    starts.extend(box.corners())
    starts.extend(np.asarray(s, dtype=float) for s in extra_starts)
    best_x, best_f = None, np.inf
    for start in starts:
        x0 = project_feasible(start, box, halfspaces)
        try:
            x, fx = _descend(f, x0, box, halfspaces, tol)
        except ValueError:
            continue  # start outside dom(f); other starts cover the region
        if fx < best_f:
            best_x, best_f = x, fx
    if best_x is None:
        raise ValueError("minimization failed from every start point")
    return best_x, best_f
