"""Feasible-region construction: box intersected with linear constraints.

External linear constraints (a.x + b <= 0 over the function's variables) are
applied to the box polytope *before* the domain is lifted into epigraph space;
the tightening loop then only ever sees feasible points, so the final model
may overestimate outside the constrained region and be tighter inside it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from . import minimize
from .domain import BoxDomain
from .expr import Expression
from .polytope import Halfspace, Polytope

if TYPE_CHECKING:
    from .cutplane import Config


class EmptyRegionError(ValueError):
    """The constraints leave no feasible point in the box."""


@dataclass
class ConstrainedRegion:
    """Box plus retained (non-redundant) constraints, with the x-polytope."""

    box: BoxDomain
    constraints: list = field(default_factory=list)
    x_polytope: Polytope = None
    discarded: list = field(default_factory=list)

    @property
    def dimension(self) -> int:
        return self.box.dimension

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        if not self.box.contains(x, tol=tol):
            return False
        return all(h.value(x) <= tol * (1.0 + np.linalg.norm(h.normal)) for h in self.constraints)


def intersect_box(box: BoxDomain, constraints=()) -> ConstrainedRegion:
    """Cut the box polytope with each constraint, discarding redundant ones.

    A constraint violated by no current vertex cannot cut anything and is
    recorded as discarded.  A constraint that would remove every vertex makes
    the region empty, which is an error here: the caller asked for a feasible
    region.
    """
    poly = Polytope.from_box(box)
    region = ConstrainedRegion(box=box, x_polytope=poly)
    for h in constraints:
        if h.normal.size != box.dimension:
            raise ValueError("constraint dimension does not match the box")
        if not poly.vertices_violating(h):
            region.discarded.append(h)
            continue
        report = poly.cut(h)
        if report.emptied:
            raise EmptyRegionError(
                f"constraint {h.normal.tolist()}.x + {h.offset} <= 0 empties the region"
            )
        region.constraints.append(h)
    return region


def lift(region: ConstrainedRegion, f: Expression, cfg: "Config") -> Polytope:
    """Extrude the x-polytope into epigraph space between floor and ceiling t.

    The ceiling is the max of f over the region's vertices (a convex function
    maximizes at a vertex); the floor is a certified lower bound on the
    constrained minimum of f, so the epigraph stays inside the lifted
    polytope.  Every x-vertex is duplicated at both t levels.
    """
    xpoly = region.x_polytope
    d = region.dimension
    xverts = xpoly.coords_matrix()
    xmin, _ = minimize.minimize_on_box(
        f, region.box, halfspaces=region.constraints, tol=cfg.tmin_tol,
        extra_starts=list(xverts),
    )
    t_lo = minimize.certified_floor(f, xmin, xverts)
    t_lo -= 1e-9 * (1.0 + abs(t_lo))  # strictly below, so the floor stays outside the epigraph
    t_hi = max(f.eval(v.coords) for v in xpoly.vertices.values())
    if not t_hi > t_lo:
        raise ValueError("function is constant on the region; nothing to underestimate")

    lifted = Polytope(d + 1)
    for h in xpoly.halfspaces:
        lifted.halfspaces.append(Halfspace(np.append(h.normal, 0.0), h.offset))
    floor_idx = len(lifted.halfspaces)
    floor_normal = np.zeros(d + 1)
    floor_normal[d] = -1.0
    lifted.halfspaces.append(Halfspace(floor_normal, t_lo))
    ceil_idx = len(lifted.halfspaces)
    ceil_normal = np.zeros(d + 1)
    ceil_normal[d] = 1.0
    lifted.halfspaces.append(Halfspace(ceil_normal, -t_hi))

    twin = {}
    for vid in sorted(xpoly.vertices):
        v = xpoly.vertices[vid]
        lo = lifted._add_vertex(np.append(v.coords, t_lo), v.active | {floor_idx})
        hi = lifted._add_vertex(np.append(v.coords, t_hi), v.active | {ceil_idx})
        lifted.adjacency[lo.id].add(hi.id)
        lifted.adjacency[hi.id].add(lo.id)
        twin[vid] = (lo.id, hi.id)
    for edge in xpoly.edges():
        u, w = tuple(edge)
        for level in (0, 1):
            a, b = twin[u][level], twin[w][level]
            lifted.adjacency[a].add(b)
            lifted.adjacency[b].add(a)
    return lifted
