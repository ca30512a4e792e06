"""Tightest-alpha search by cutting planes on the epigraph outer approximation.

The feasible epigraph {(x, t) : f(x) <= t} over the (possibly constrained) box
is outer-approximated by a polytope kept as an explicit vertex set.  Starting
from alpha = 1, the loop separates the vertex that most violates t >= q(x),
refines the polytope with the supporting hyperplane through the violated
boundary point, and lowers alpha to exact coincidence wherever a new vertex
proves the quadratic overestimates f by more than the tolerance.  The minimum
of t - q(x) over the remaining vertices is a certified lower bound on the
worst-case underestimation gap; once it clears -epsilon the current alpha is
sound over the whole region.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import polyhedral, quad
from .domain import BoxDomain
from .expr import Expression
from .minimize import minimize_on_box
from .polytope import Halfspace, Polytope, Vertex


@dataclass
class Config:
    """Run parameters; epsilon is interpreted after function scaling."""

    epsilon: float = 1e-3
    max_iterations: int = 100_000
    time_limit: float | None = None  # seconds
    bisection_tol: float = 1e-10
    tmin_tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.bisection_tol <= 0 or self.tmin_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


class RunStatus(Enum):
    CONVERGED = "Converged"
    TIME_LIMIT = "TimeLimit"
    ITERATION_LIMIT = "IterationLimit"


@dataclass
class RunResult:
    """Outcome of one tightening run (all values in post-scaling units)."""

    alpha: float
    lower_bound: float
    iterations: int
    total_vertices_created: int
    decrement_points: list
    status: RunStatus
    offset: float  # 0 when converged; = lower_bound on early termination,
    # in which case q + offset is still a valid underestimator
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "lower_bound": self.lower_bound,
            "iterations": self.iterations,
            "total_vertices_created": self.total_vertices_created,
            "decrement_points": [p.tolist() for p in self.decrement_points],
            "status": self.status.value,
            "offset": self.offset,
            "wall_time": self.wall_time,
        }


@dataclass
class ProblemInstance:
    """A function on a box, a construction point, optional linear constraints.

    ``scaling`` is the factor multiplied into f before the run; use
    :func:`scaled_instance` to populate it from the box range of f.
    """

    f: Expression
    box: BoxDomain
    x0: np.ndarray
    linear_constraints: list = field(default_factory=list)
    scaling: float = 1.0

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.x0.size != self.f.n_vars or self.box.dimension != self.f.n_vars:
            raise ValueError("dimension mismatch between function, box, and x0")
        if not self.box.contains(self.x0, tol=1e-12):
            raise ValueError("construction point x0 must lie inside the box")
        if not (np.isfinite(self.scaling) and self.scaling > 0):
            raise ValueError("scaling factor must be positive and finite")
        fvars = self.f.variables()
        for h in self.linear_constraints:
            if h.normal.size != self.f.n_vars:
                raise ValueError("constraint dimension does not match the function")
            used = set(np.nonzero(h.normal)[0].tolist())
            if not used <= fvars:
                raise ValueError(
                    f"constraint references variables {sorted(used - fvars)} "
                    "absent from the function"
                )
            if h.value(self.x0) > 1e-9 * (1.0 + float(np.linalg.norm(h.normal))):
                raise ValueError("construction point x0 violates a linear constraint")


@dataclass
class State:
    """Mutable loop state: outer-approximation polytope plus bookkeeping."""

    poly: Polytope
    interior: np.ndarray  # strictly inside the epigraph
    quad: quad.QuadraticUnderestimator
    active: dict  # vertex id -> (t - linear_part, curvature/2) for fast scans
    f: Expression  # the (scaled) function being underestimated


def scale(f: Expression, box: BoxDomain, tol: float = 1e-8):
    """Normalizing wrapper: values of the result lie within [-1, 1] on the box.

    The factor is 1/max(|min f|, |max f|); the max of a convex function sits
    at a box corner, the min comes from the projected-descent minimizer.
    """
    fmax = max(f.eval(v) for v in box.corners())
    _, fmin = minimize_on_box(f, box, tol=tol)
    magnitude = max(abs(fmin), abs(fmax))
    if magnitude < 1e-14:
        raise ValueError("function is identically zero on the box; cannot scale")
    factor = 1.0 / magnitude
    return f.scaled(factor), factor


def scaled_instance(f: Expression, box: BoxDomain, x0, linear_constraints=(),
                    tol: float = 1e-8) -> ProblemInstance:
    """ProblemInstance with the scaling factor computed from the box range."""
    _, factor = scale(f, box, tol=tol)
    return ProblemInstance(f, box, np.asarray(x0, dtype=float),
                           list(linear_constraints), scaling=factor)


def _entry(q: quad.QuadraticUnderestimator, v: Vertex):
    """Per-vertex cache: t - q(x; alpha) == base - alpha * curve."""
    x, t = v.coords[:-1], float(v.coords[-1])
    base = t - q.linear_part(x)
    curve = 0.5 * q.curvature(x)
    return base, curve


def initialize(inst: ProblemInstance, cfg: Config) -> State:
    """Build the lifted outer approximation, interior point, and alpha=1 model."""
    f = inst.f if inst.scaling == 1.0 else inst.f.scaled(inst.scaling)
    region = polyhedral.intersect_box(inst.box, inst.linear_constraints)
    poly = polyhedral.lift(region, f, cfg)

    tvals = [float(v.coords[-1]) for v in poly.vertices.values()]
    t_lo, t_hi = min(tvals), max(tvals)
    x_center = region.x_polytope.coords_matrix().mean(axis=0)
    f_center = f.eval(x_center)
    t_p = 0.5 * (t_lo + t_hi)
    margin = 1e-6 * (t_hi - t_lo)
    for _ in range(200):
        if f_center < t_p - margin:
            break
        t_p = 0.5 * (t_p + t_hi)
    else:
        raise ValueError("could not place an interior point below the ceiling")

    q = quad.build(f, inst.x0)
    active = {vid: _entry(q, poly.vertices[vid]) for vid in sorted(poly.vertices)}
    return State(poly=poly, interior=np.append(x_center, t_p), quad=q,
                 active=active, f=f)


def separate(state: State, u: Vertex, bisection_tol: float = 1e-10):
    """Supporting hyperplane of the epigraph cutting off the outside vertex u.

    Bisects along the segment from the interior point to u for the epigraph
    boundary crossing w, then linearizes f(x) - t there.  Returns the
    halfspace (normal (grad f(w_x), -1)) and the boundary point w.
    """
    f = state.f
    p = state.interior
    target = u.coords

    def gap(lam: float) -> float:
        z = lam * target + (1.0 - lam) * p
        return f.eval(z[:-1]) - z[-1]

    g_hi = gap(1.0)
    if g_hi <= 0.0:
        raise ValueError("vertex lies inside the epigraph; nothing to separate")
    lo, hi = 0.0, 1.0
    lam = 0.5
    for _ in range(200):
        lam = 0.5 * (lo + hi)
        g = gap(lam)
        if abs(g) <= bisection_tol:
            break
        if g > 0.0:
            hi = lam
        else:
            lo = lam
    w = lam * target + (1.0 - lam) * p
    wx = w[:-1]
    grad = f.gradient(wx)
    normal = np.append(grad, -1.0)
    offset = f.eval(wx) - float(grad @ wx)
    return Halfspace(normal, offset), w


def run(inst: ProblemInstance, cfg: Config | None = None, trace=None) -> RunResult:
    """Find the tightest alpha for the instance; see the module docstring.

    ``trace``, if given, receives one JSON line per iteration (file-like
    object with ``write``).
    """
    cfg = cfg or Config()
    started = time.perf_counter()
    deadline = None if cfg.time_limit is None else started + cfg.time_limit

    state = initialize(inst, cfg)
    f, q, poly, active = state.f, state.quad, state.poly, state.active
    alpha = 1.0
    decrements: list[np.ndarray] = []
    total_created = poly.n_vertices
    iterations = 0
    eps = cfg.epsilon

    def emit(lb, event):
        if trace is not None:
            trace.write(json.dumps({
                "iteration": iterations, "lb": lb, "alpha": alpha,
                "n_active": len(active), "n_vertices": poly.n_vertices,
                "event": event,
            }) + "\n")

    while True:
        lb = np.inf
        best_id = None
        for vid, (base, curve) in active.items():
            value = base - alpha * curve
            if value < lb:
                lb, best_id = value, vid
        if lb > -eps:
            status, offset = RunStatus.CONVERGED, 0.0
            break
        if iterations >= cfg.max_iterations:
            status, offset = RunStatus.ITERATION_LIMIT, lb
            break
        if deadline is not None and time.perf_counter() > deadline:
            status, offset = RunStatus.TIME_LIMIT, lb
            break

        u = poly.vertices[best_id]
        xu, tu = u.coords[:-1], float(u.coords[-1])
        event = "cut"
        if f.eval(xu) <= tu:
            # Inside the epigraph yet overestimated by more than eps: the
            # vertex cannot be separated, but lowering alpha to coincidence
            # at x_u restores underestimation there.
            cand = quad.alpha_candidate(q, f, xu)
            if cand is None or cand >= alpha:
                raise RuntimeError("epigraph vertex admits no tightening step")
            alpha = cand
            q.alpha = alpha
            decrements.append(xu.copy())
            event = "decrement"
        else:
            halfspace, _ = separate(state, u, cfg.bisection_tol)
            report = poly.cut(halfspace)
            if report.emptied:
                raise RuntimeError("supporting cut emptied the outer approximation")
            total_created += len(report.created)

            best_cand, best_point = None, None
            fresh = []
            for v in report.created:
                base, curve = _entry(q, v)
                fresh.append((v.id, base, curve))
                xv = v.coords[:-1]
                fv = f.eval(xv)
                linear = float(v.coords[-1]) - base
                if fv - (linear + alpha * curve) < -eps:
                    c = quad.alpha_candidate(q, f, xv)
                    if c is not None and (best_cand is None or c < best_cand):
                        best_cand, best_point = c, xv
            if best_cand is not None and best_cand < alpha:
                alpha = best_cand
                q.alpha = alpha
                decrements.append(best_point.copy())
                event = "decrement"

            for v in report.removed:
                active.pop(v.id, None)
            for vid, base, curve in fresh:
                active[vid] = (base, curve)

        # Remark-4 pruning: once a vertex clears -eps it can never return,
        # since alpha only decreases.
        active = {vid: bc for vid, bc in active.items() if bc[0] - alpha * bc[1] < -eps}
        state.active = active
        iterations += 1
        emit(lb, event)

    emit(lb, "converge" if status is RunStatus.CONVERGED else "stop")
    return RunResult(
        alpha=alpha,
        lower_bound=float(lb),
        iterations=iterations,
        total_vertices_created=total_created,
        decrement_points=decrements,
        status=status,
        offset=float(offset),
        wall_time=time.perf_counter() - started,
    )
