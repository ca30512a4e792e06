"""Bounded polytopes as explicit vertex sets maintained under halfspace cuts.

A polytope starts from a box (so it is bounded and simple) and is refined by
``cut``.  Simplicity — every vertex lying on exactly d facets — is preserved
by perturbing the offset of any cut that passes through an existing vertex.
Adjacency is combinatorial: two vertices are adjacent iff their active facet
sets share exactly d-1 indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .domain import BoxDomain


@dataclass(frozen=True)
class Halfspace:
    """The set {v : normal . v + offset <= 0}."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        a = np.asarray(self.normal, dtype=float)
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", float(self.offset))
        if a.ndim != 1 or not np.isfinite(a).all() or not np.any(a != 0.0):
            raise ValueError("halfspace normal must be finite and nonzero")
        if not np.isfinite(self.offset):
            raise ValueError("halfspace offset must be finite")

    def value(self, v) -> float:
        """Signed evaluation normal . v + offset (positive = violated)."""
        return float(np.dot(self.normal, v) + self.offset)


class Vertex:
    """A polytope vertex: coordinates plus the set of facets it lies on."""

    __slots__ = ("id", "coords", "active", "payload")

    def __init__(self, vid: int, coords: np.ndarray, active: frozenset):
        self.id = vid
        self.coords = coords
        self.active = active
        self.payload = None  # free slot for caller bookkeeping

    def __repr__(self):
        return f"Vertex(id={self.id}, coords={self.coords}, active={sorted(self.active)})"


@dataclass
class CutReport:
    """Outcome of one halfspace cut."""

    removed: list = field(default_factory=list)
    created: list = field(default_factory=list)
    emptied: bool = False
    halfspace_index: int = -1
    applied_offset: float = 0.0  # offset actually stored (after any perturbation)


class Polytope:
    """Vertex/adjacency representation of an intersection of halfspaces.

    Single-writer: ``cut`` mutates under exclusive access; read-only queries
    may run concurrently between cuts.
    """

    #: degeneracy perturbation seed, scaled by (1 + |offset|)
    DELTA0 = 1e-9
    #: degeneracy tolerance, scaled by (1 + ||normal||)
    TAU_DEG = 1e-9

    def __init__(self, dimension: int):
        self.dimension = dimension
        self.halfspaces: list[Halfspace] = []
        self.vertices: dict[int, Vertex] = {}
        self.adjacency: dict[int, set[int]] = {}
        self._next_id = 0

    # -- construction -------------------------------------------------------

    @classmethod
    def from_box(cls, bounds: BoxDomain) -> "Polytope":
        """The box itself: 2^d vertices on the hypercube adjacency graph.

        Halfspace 2i is the lower bound of coordinate i (-x_i + lo_i <= 0),
        halfspace 2i+1 the upper bound (x_i - hi_i <= 0).
        """
        d = bounds.dimension
        poly = cls(d)
        for i in range(d):
            lo_normal = np.zeros(d)
            lo_normal[i] = -1.0
            poly.halfspaces.append(Halfspace(lo_normal, bounds.lower[i]))
            hi_normal = np.zeros(d)
            hi_normal[i] = 1.0
            poly.halfspaces.append(Halfspace(hi_normal, -bounds.upper[i]))
        for mask in range(2 ** d):
            coords = np.empty(d)
            active = []
            for i in range(d):
                if mask >> i & 1:
                    coords[i] = bounds.upper[i]
                    active.append(2 * i + 1)
                else:
                    coords[i] = bounds.lower[i]
                    active.append(2 * i)
            poly._add_vertex(coords, frozenset(active))
        for vid, v in poly.vertices.items():
            for i in range(d):
                poly.adjacency[vid].add(vid ^ (1 << i))
        return poly

    def _add_vertex(self, coords: np.ndarray, active: frozenset) -> Vertex:
        v = Vertex(self._next_id, coords, active)
        self._next_id += 1
        self.vertices[v.id] = v
        self.adjacency[v.id] = set()
        return v

    # -- queries ------------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def coords_matrix(self) -> np.ndarray:
        """Vertex coordinates stacked row-wise, ordered by ascending id."""
        ids = sorted(self.vertices)
        return np.array([self.vertices[i].coords for i in ids])

    def edges(self) -> set:
        return {frozenset((u, w)) for u, nbrs in self.adjacency.items() for w in nbrs}

    def vertices_violating(self, h: Halfspace) -> list:
        """Vertices strictly on the positive side of h; empty = h redundant."""
        return [v for _, v in sorted(self.vertices.items()) if h.value(v.coords) > 0.0]

    def dump(self) -> str:
        """One vertex per line: coordinates then active indices (debug aid)."""
        lines = []
        for vid in sorted(self.vertices):
            v = self.vertices[vid]
            coords = " ".join(repr(c) for c in v.coords)
            lines.append(f"{coords} | {' '.join(map(str, sorted(v.active)))}")
        return "\n".join(lines)

    # -- mutation -----------------------------------------------------------

    def cut(self, h: Halfspace) -> CutReport:
        """Intersect with h, updating vertices and adjacency incrementally.

        Vertices strictly beyond h are removed; a new vertex is created where
        h's boundary crosses each edge from a removed to a kept vertex.  If h
        passes through an existing vertex (within tolerance) its offset is
        loosened by a growing perturbation first, which keeps the polytope a
        superset of the unperturbed intersection.  A cut that would remove
        every vertex leaves the polytope unmodified and reports ``emptied``.
        """
        if not self.vertices:
            raise ValueError("cut on an empty polytope")
        a = h.normal
        if a.size != self.dimension:
            raise ValueError("halfspace dimension mismatch")
        ids = sorted(self.vertices)
        coords = np.array([self.vertices[i].coords for i in ids])
        raw = coords @ a + h.offset
        tau = self.TAU_DEG * (1.0 + float(np.linalg.norm(a)))

        offset = h.offset
        values = raw
        delta = self.DELTA0 * (1.0 + abs(h.offset))
        while np.any(np.abs(values) <= tau):
            offset = h.offset - delta
            values = raw - delta
            delta *= 10.0

        report = CutReport(halfspace_index=len(self.halfspaces), applied_offset=offset)
        value_of = dict(zip(ids, values))
        removed_ids = [vid for vid in ids if value_of[vid] > 0.0]
        if len(removed_ids) == len(ids):
            report.emptied = True
            report.halfspace_index = -1
            return report

        index = len(self.halfspaces)
        self.halfspaces.append(Halfspace(a, offset))
        if not removed_ids:
            return report  # redundant: stored but touches nothing

        removed_set = set(removed_ids)
        created: list[Vertex] = []
        for uid in removed_ids:
            u = self.vertices[uid]
            for wid in sorted(self.adjacency[uid]):
                if wid in removed_set:
                    continue
                w = self.vertices[wid]
                su, sw = value_of[uid], value_of[wid]
                lam = su / (su - sw)
                point = u.coords + lam * (w.coords - u.coords)
                nv = self._add_vertex(point, (u.active & w.active) | {index})
                self.adjacency[nv.id].add(wid)
                self.adjacency[wid].add(nv.id)
                created.append(nv)

        # adjacency among created vertices: share d-1 active facets
        need = self.dimension - 1
        for i, v1 in enumerate(created):
            for v2 in created[i + 1:]:
                if len(v1.active & v2.active) == need:
                    self.adjacency[v1.id].add(v2.id)
                    self.adjacency[v2.id].add(v1.id)

        for uid in removed_ids:
            report.removed.append(self.vertices.pop(uid))
            for wid in self.adjacency.pop(uid):
                if wid in self.adjacency:
                    self.adjacency[wid].discard(uid)
        report.created = created
        return report
