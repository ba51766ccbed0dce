"""Z^d-periodic graphs, torus rescalings, and discrete vector calculus.

A periodic graph is stored by its unit cell: a finite fiber of vertices with
embedded positions in [0,1)^d and a list of edge orbits.  An orbit (v, w, k)
stands for the infinite translation family {((z,v), (z+k,w)) : z in Z^d}.
The reversed family (w, v, -k) is the *same* orbit; we keep one canonical
orientation and derive the other on demand, so antisymmetry of fluxes and
symmetry of the edge set hold by construction instead of by bookkeeping.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np


class EpsTooLarge(ValueError):
    """Mesh does not satisfy the standing assumption eps * R0 < 1/2."""


class MalformedFile(ValueError):
    """Graph or measure file does not match the documented schema."""


class NonIncreasingPositions(ValueError):
    """1d generator requires strictly increasing positions in [0,1)."""


@dataclass(frozen=True, order=True)
class EdgeOrbit:
    """One translation class of oriented edges: (z, tail) -> (z + shift, head)."""

    tail: int
    head: int
    shift: tuple[int, ...]

    def reversed(self) -> "EdgeOrbit":
        return EdgeOrbit(self.head, self.tail, tuple(-s for s in self.shift))

    def canonical(self) -> tuple["EdgeOrbit", int]:
        """Return (canonical orientation, sign) with sign -1 if this is the reverse."""
        rev = self.reversed()
        if (self.tail, self.head, self.shift) <= (rev.tail, rev.head, rev.shift):
            return self, +1
        return rev, -1


@dataclass(frozen=True, eq=False)
class PeriodicGraph:
    """Unit-cell description of a Z^d-periodic embedded graph.

    dim        spatial dimension d >= 1
    labels     fiber vertex labels, defines the fiber index order
    positions  (|V|, d) embedded positions in [0,1)^d
    orbits     canonical edge orbits, sorted, no duplicates
    alpha      strictly positive weight per orbit (shared by both orientations)
    """

    dim: int
    labels: tuple[str, ...]
    positions: np.ndarray
    orbits: tuple[EdgeOrbit, ...]
    alpha: np.ndarray

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        pos = np.asarray(self.positions, dtype=float)
        if pos.shape != (len(self.labels), self.dim):
            raise ValueError("positions must have shape (|V|, dim)")
        if np.any(pos < 0.0) or np.any(pos >= 1.0):
            raise ValueError("positions must lie in [0,1)^d")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("fiber labels must be unique")
        if not self.orbits:
            raise ValueError("graph has no edge orbits: no transport possible")

        canon = []
        for orb in self.orbits:
            if not (0 <= orb.tail < len(self.labels) and 0 <= orb.head < len(self.labels)):
                raise ValueError(f"orbit {orb} references unknown fiber vertex")
            if len(orb.shift) != self.dim:
                raise ValueError(f"orbit {orb} shift has wrong dimension")
            if orb.tail == orb.head and all(s == 0 for s in orb.shift):
                raise ValueError(f"orbit {orb} is a self-loop")
            canon.append(orb.canonical()[0])
        if len(set(canon)) != len(canon):
            raise ValueError("duplicate orbit (an orbit and its reverse are the same edge)")

        order = sorted(range(len(canon)), key=lambda i: canon[i])
        alpha = np.asarray(self.alpha, dtype=float)[order].copy()
        if alpha.shape != (len(canon),):
            raise ValueError("alpha must provide one weight per orbit")
        if np.any(alpha <= 0.0):
            raise ValueError("all orbit weights must be strictly positive")

        pos = pos.copy()
        pos.setflags(write=False)
        alpha.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "orbits", tuple(canon[i] for i in order))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "labels", tuple(self.labels))

    def __eq__(self, other) -> bool:
        if not isinstance(other, PeriodicGraph):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.labels == other.labels
            and self.orbits == other.orbits
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.alpha, other.alpha)
        )

    @property
    def n_fibers(self) -> int:
        return len(self.labels)

    @property
    def n_orbits(self) -> int:
        return len(self.orbits)

    @property
    def r0(self) -> int:
        """Maximal cell displacement max |shift|_inf over orbits."""
        return max(max(abs(s) for s in orb.shift) for orb in self.orbits)

    @cached_property
    def orbit_index(self) -> dict[EdgeOrbit, int]:
        return {orb: i for i, orb in enumerate(self.orbits)}

    @cached_property
    def orbit_vectors(self) -> np.ndarray:
        """(n_orbits, dim) embedded displacement shift + pos(head) - pos(tail)."""
        vecs = np.array(
            [
                np.asarray(orb.shift, dtype=float) + self.positions[orb.head] - self.positions[orb.tail]
                for orb in self.orbits
            ]
        )
        vecs.setflags(write=False)
        return vecs

    @cached_property
    def fiber_incidence(self) -> np.ndarray:
        """(|V|, n_orbits) signed incidence; div J on the unit cell is D @ J.

        A self-orbit (v, v, k) contributes +J - J = 0 at v, matching the fact
        that a translation-invariant circulation has no divergence.
        """
        d = np.zeros((self.n_fibers, self.n_orbits))
        for i, orb in enumerate(self.orbits):
            d[orb.tail, i] += 1.0
            d[orb.head, i] -= 1.0
        d.setflags(write=False)
        return d

    def degrees(self) -> tuple[int, ...]:
        """Vertex degree inside the unit cell (equal in every cell by periodicity)."""
        deg = [0] * self.n_fibers
        for orb in self.orbits:
            deg[orb.tail] += 1
            deg[orb.head] += 1
        return tuple(deg)


@dataclass(frozen=True, eq=False)
class PeriodicFlux:
    """Z^d-periodic antisymmetric edge field, one value per canonical orbit."""

    graph: PeriodicGraph
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).copy()
        if vals.shape != (self.graph.n_orbits,):
            raise ValueError("flux needs one value per orbit")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def value(self, tail: int, head: int, shift: tuple[int, ...]) -> float:
        """J on the oriented edge (0,tail) -> (shift,head); reversal negates."""
        orb, sign = EdgeOrbit(tail, head, tuple(shift)).canonical()
        idx = self.graph.orbit_index.get(orb)
        if idx is None:
            raise KeyError(f"no orbit {(tail, head, shift)} in graph")
        return sign * float(self.values[idx])


def flux_from_edges(g: PeriodicGraph, assignments: dict) -> PeriodicFlux:
    """Build a periodic flux from oriented assignments {(tail, head, shift): value}.

    Values given on a non-canonical orientation are stored negated, so the
    flux reproduces exactly the requested oriented values.
    """
    vals = np.zeros(g.n_orbits)
    for (tail, head, shift), value in assignments.items():
        orb, sign = EdgeOrbit(tail, head, tuple(shift)).canonical()
        idx = g.orbit_index.get(orb)
        if idx is None:
            raise KeyError(f"no orbit {(tail, head, shift)} in graph")
        vals[idx] = sign * value
    return PeriodicFlux(g, vals)


@dataclass(frozen=True)
class ValidationCheck:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[ValidationCheck, ...]
    r0: int
    degrees: tuple[int, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> str:
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}" for c in self.checks]
        lines.append(f"r0 = {self.r0}, fiber degrees = {list(self.degrees)}")
        return "\n".join(lines)


def _cover_connected(g: PeriodicGraph) -> tuple[bool, str]:
    """BFS connectivity on the finite cover of side 2*r0 + 1.

    The cover is large enough that its translates overlap, so a connected
    cover forces the infinite graph to be connected.  r0 == 0 means no edge
    ever leaves its cell, which disconnects distinct cells outright.
    """
    r0 = g.r0
    if r0 == 0:
        return False, "all orbit shifts are zero; cells are mutually disconnected"
    side = 2 * r0 + 1
    cells = list(np.ndindex(*([side] * g.dim)))
    cell_idx = {c: i for i, c in enumerate(cells)}
    n = len(cells) * g.n_fibers

    adj: list[list[int]] = [[] for _ in range(n)]
    for c in cells:
        ci = cell_idx[c]
        for orb in g.orbits:
            tgt = tuple(c[i] + orb.shift[i] for i in range(g.dim))
            if tgt in cell_idx:
                a = ci * g.n_fibers + orb.tail
                b = cell_idx[tgt] * g.n_fibers + orb.head
                adj[a].append(b)
                adj[b].append(a)

    seen = [False] * n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    if count == n:
        return True, f"cover of side {side} is connected ({n} vertices)"
    return False, f"cover of side {side} splits: reached {count} of {n} vertices"


def validate_graph(g: PeriodicGraph) -> ValidationReport:
    """Report the structural invariants of a periodic graph."""
    checks = [
        ValidationCheck(
            "orbit-symmetry",
            True,
            "reversed orientations are derived from canonical storage, never stored",
        ),
        ValidationCheck(
            "alpha-positive",
            bool(np.all(g.alpha > 0.0)),
            f"min weight {g.alpha.min():.6g}",
        ),
    ]
    connected, detail = _cover_connected(g)
    checks.append(ValidationCheck("connected", connected, detail))
    checks.append(
        ValidationCheck("r0-finite", True, f"max |shift|_inf = {g.r0}")
    )
    return ValidationReport(tuple(checks), g.r0, g.degrees())


@dataclass(frozen=True)
class RescaledGraph:
    """Finite torus graph at mesh eps = 1/N with symmetrized weights.

    Vertices are indexed cell-major: index(z, v) = ravel(z) * |V| + v with z
    row-major over {0..N-1}^d.  Edges are indexed (cell, orbit):
    edge = ravel(z) * n_orbits + orbit, giving exactly N^d * n_orbits
    oriented representatives (the reverse orientation is implicit).
    """

    base: PeriodicGraph
    n_cells: int

    def __post_init__(self):
        # standing assumption eps * r0 < 1/2, checked in exact integer form
        if 2 * self.base.r0 >= self.n_cells:
            raise EpsTooLarge(
                f"eps = 1/{self.n_cells} with r0 = {self.base.r0} violates eps*r0 < 1/2"
            )

    @property
    def eps(self) -> float:
        return 1.0 / self.n_cells

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def n_vertices(self) -> int:
        return self.n_cells**self.dim * self.base.n_fibers

    @property
    def n_edges(self) -> int:
        return self.n_cells**self.dim * self.base.n_orbits

    def vertex_index(self, cell: tuple[int, ...], fiber: int) -> int:
        wrapped = tuple(c % self.n_cells for c in cell)
        flat = int(np.ravel_multi_index(wrapped, (self.n_cells,) * self.dim))
        return flat * self.base.n_fibers + fiber

    def vertex_cell(self, idx: int) -> tuple[int, ...]:
        return tuple(
            int(c) for c in np.unravel_index(idx // self.base.n_fibers, (self.n_cells,) * self.dim)
        )

    def vertex_fiber(self, idx: int) -> int:
        return idx % self.base.n_fibers

    def vertex_label(self, idx: int) -> str:
        z = ",".join(str(c) for c in self.vertex_cell(idx))
        return f"({z};{self.base.labels[self.vertex_fiber(idx)]})"

    @cached_property
    def edge_tail(self) -> np.ndarray:
        return self._edge_arrays[0]

    @cached_property
    def edge_head(self) -> np.ndarray:
        return self._edge_arrays[1]

    @cached_property
    def edge_orbit(self) -> np.ndarray:
        return self._edge_arrays[2]

    @cached_property
    def _edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        g = self.base
        tails = np.empty(self.n_edges, dtype=np.int64)
        heads = np.empty(self.n_edges, dtype=np.int64)
        orbs = np.empty(self.n_edges, dtype=np.int64)
        e = 0
        for cell in np.ndindex(*([self.n_cells] * self.dim)):
            for oi, orb in enumerate(g.orbits):
                tails[e] = self.vertex_index(cell, orb.tail)
                heads[e] = self.vertex_index(
                    tuple(cell[i] + orb.shift[i] for i in range(self.dim)), orb.head
                )
                orbs[e] = oi
                e += 1
        for a in (tails, heads, orbs):
            a.setflags(write=False)
        return tails, heads, orbs

    @cached_property
    def alpha_eps(self) -> np.ndarray:
        """Symmetrized rescaled weights alpha^eps per edge representative.

        The based representative of an edge carries eps * alpha(orbit); the
        reverse orientation is based at the head's cell and belongs to the
        same orbit, so with per-orbit weights the symmetrization
        (bar+bar_rev)/2 is the identity.  Kept in formula form regardless.
        """
        bar_fwd = self.eps * self.base.alpha[self.edge_orbit]
        rev = [self.base.orbit_index[orb.reversed().canonical()[0]] for orb in self.base.orbits]
        bar_rev = self.eps * self.base.alpha[np.asarray(rev)][self.edge_orbit]
        out = 0.5 * (bar_fwd + bar_rev)
        out.setflags(write=False)
        return out

    @cached_property
    def positions(self) -> np.ndarray:
        """(n_vertices, d) torus positions eps * (z + pos(fiber))."""
        g = self.base
        pos = np.empty((self.n_vertices, self.dim))
        for cell in np.ndindex(*([self.n_cells] * self.dim)):
            for v in range(g.n_fibers):
                pos[self.vertex_index(cell, v)] = self.eps * (
                    np.asarray(cell, dtype=float) + g.positions[v]
                )
        pos %= 1.0
        pos.setflags(write=False)
        return pos

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per vertex: ((neighbor, edge_index), ...) over both orientations."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n_vertices)]
        for e in range(self.n_edges):
            t, h = int(self.edge_tail[e]), int(self.edge_head[e])
            adj[t].append((h, e))
            adj[h].append((t, e))
        return tuple(tuple(a) for a in adj)

    def nearest_vertex(self, point) -> int:
        """Vertex closest to a torus point in Euclidean torus distance.

        Ties go to the smallest vertex index, i.e. lexicographic in (cell, fiber).
        """
        p = np.asarray(point, dtype=float) % 1.0
        delta = self.positions - p
        delta -= np.round(delta)
        d2 = np.einsum("ij,ij->i", delta, delta)
        return int(np.argmin(d2))

    def incident_divergence(self, flux: np.ndarray) -> np.ndarray:
        vals = np.asarray(flux, dtype=float)
        if vals.shape != (self.n_edges,):
            raise ValueError("flux needs one value per edge representative")
        div = np.zeros(self.n_vertices)
        np.add.at(div, self.edge_tail, vals)
        np.add.at(div, self.edge_head, -vals)
        return div


def build_rescaled(g: PeriodicGraph, eps) -> RescaledGraph:
    """Rescale onto the torus at mesh eps = 1/N; raises EpsTooLarge if eps*r0 >= 1/2."""
    frac = Fraction(eps).limit_denominator(10**9)
    if frac.numerator != 1 or frac.denominator < 1:
        raise ValueError(f"eps must be the reciprocal of a positive integer, got {eps!r}")
    return RescaledGraph(g, frac.denominator)


def divergence(graph, flux) -> np.ndarray:
    """Discrete divergence div J(x) = sum_{y ~ x} J(x, y).

    For a PeriodicFlux the map is returned on the unit-cell fiber; for a
    rescaled graph the flux is an array over edge representatives and the map
    covers all torus vertices.
    """
    if isinstance(graph, PeriodicGraph):
        if not isinstance(flux, PeriodicFlux):
            flux = PeriodicFlux(graph, flux)
        return graph.fiber_incidence @ flux.values
    if isinstance(graph, RescaledGraph):
        return graph.incident_divergence(flux)
    raise TypeError(f"unsupported graph type {type(graph)!r}")


def effective_flux(g: PeriodicGraph, flux) -> np.ndarray:
    """Cell-averaged transport vector of a periodic flux.

    Equals (1/2) sum over oriented cell-based edges of J(x,y) (y - x); both
    orientations of an orbit contribute equally, collapsing to a plain sum of
    J(orbit) times the embedded orbit displacement.
    """
    if not isinstance(flux, PeriodicFlux):
        flux = PeriodicFlux(g, flux)
    return g.orbit_vectors.T @ flux.values


class DiscreteMeasure:
    """Nonnegative mass vector on the vertices of a rescaled graph."""

    __slots__ = ("weights", "total_mass")

    def __init__(self, weights):
        w = np.asarray(weights, dtype=float).copy()
        if w.ndim != 1:
            raise ValueError("weights must be a flat vector")
        if np.any(w < 0.0):
            raise ValueError("measure weights must be nonnegative")
        w.setflags(write=False)
        self.weights = w
        self.total_mass = float(w.sum())

    @classmethod
    def zeros(cls, rg: RescaledGraph) -> "DiscreteMeasure":
        return cls(np.zeros(rg.n_vertices))

    @classmethod
    def dirac(cls, rg: RescaledGraph, vertex: int, mass: float = 1.0) -> "DiscreteMeasure":
        w = np.zeros(rg.n_vertices)
        w[vertex] = mass
        return cls(w)

    @classmethod
    def from_pairs(cls, rg: RescaledGraph, pairs) -> "DiscreteMeasure":
        w = np.zeros(rg.n_vertices)
        for vertex, mass in pairs:
            w[vertex] += mass
        return cls(w)

    def support(self) -> np.ndarray:
        return np.nonzero(self.weights > 0.0)[0]

    def __len__(self) -> int:
        return len(self.weights)


def make_1d_nn(positions) -> PeriodicGraph:
    """Nearest-neighbor chain on a 1d fiber, weights half the gap length."""
    pos = [float(p) for p in positions]
    if not pos:
        raise NonIncreasingPositions("need at least one position")
    if any(not (0.0 <= p < 1.0) for p in pos):
        raise NonIncreasingPositions("positions must lie in [0,1)")
    if any(b <= a for a, b in zip(pos, pos[1:])):
        raise NonIncreasingPositions("positions must be strictly increasing")

    k = len(pos)
    orbits, alpha = [], []
    if k == 1:
        orbits.append(EdgeOrbit(0, 0, (1,)))
        alpha.append(0.5)
    else:
        for i in range(k - 1):
            orbits.append(EdgeOrbit(i, i + 1, (0,)))
            alpha.append(0.5 * (pos[i + 1] - pos[i]))
        orbits.append(EdgeOrbit(k - 1, 0, (1,)))
        alpha.append(0.5 * (pos[0] + 1.0 - pos[k - 1]))
    return PeriodicGraph(
        dim=1,
        labels=tuple(str(i) for i in range(k)),
        positions=np.asarray(pos).reshape(k, 1),
        orbits=tuple(orbits),
        alpha=np.asarray(alpha),
    )


def make_cubic(d: int, neighborhood: str = "axis") -> PeriodicGraph:
    """Single-fiber cubic lattice in dimension d (1..3).

    neighborhood "axis" links along coordinate axes only; "linf" links every
    cell at sup-distance one, i.e. diagonals included.  Weights are half the
    Euclidean edge length.
    """
    if d not in (1, 2, 3):
        raise ValueError("cubic generator supports d in {1, 2, 3}")
    if neighborhood not in ("axis", "linf"):
        raise ValueError(f"unknown neighborhood {neighborhood!r}")

    shifts: list[tuple[int, ...]] = []
    if neighborhood == "axis":
        for i in range(d):
            e = [0] * d
            e[i] = 1
            shifts.append(tuple(e))
    else:
        for k in np.ndindex(*([3] * d)):
            s = tuple(int(c) - 1 for c in k)
            if any(s) and EdgeOrbit(0, 0, s).canonical()[0].shift == s:
                shifts.append(s)

    orbits = tuple(EdgeOrbit(0, 0, s) for s in shifts)
    alpha = np.array([0.5 * float(np.linalg.norm(s)) for s in shifts])
    return PeriodicGraph(
        dim=d,
        labels=("0",),
        positions=np.zeros((1, d)),
        orbits=orbits,
        alpha=alpha,
    )


_GRAPH_FIELDS = {"dim", "fiber", "orbits"}
_FIBER_FIELDS = {"id", "pos"}
_ORBIT_FIELDS = {"from", "to", "shift", "alpha"}


def load_graph(path) -> PeriodicGraph:
    """Parse a graph file: {dim, fiber:[{id,pos}], orbits:[{from,to,shift,alpha?}]}.

    Omitted orbit weights default to half the Euclidean length of the embedded
    edge.  Unknown fields are rejected.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedFile(f"cannot parse {path}: {exc}") from exc
    return graph_from_dict(doc)


def graph_from_dict(doc) -> PeriodicGraph:
    if not isinstance(doc, dict):
        raise MalformedFile("graph document must be an object")
    if set(doc) - _GRAPH_FIELDS or _GRAPH_FIELDS - set(doc):
        raise MalformedFile(f"graph document needs exactly the fields {sorted(_GRAPH_FIELDS)}")
    dim = doc["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise MalformedFile("dim must be a positive integer")

    labels, positions = [], []
    for entry in doc["fiber"]:
        if not isinstance(entry, dict) or set(entry) != _FIBER_FIELDS:
            raise MalformedFile(f"fiber entries need exactly the fields {sorted(_FIBER_FIELDS)}")
        labels.append(str(entry["id"]))
        if len(entry["pos"]) != dim:
            raise MalformedFile("fiber position has wrong dimension")
        positions.append([float(c) for c in entry["pos"]])
    index = {lab: i for i, lab in enumerate(labels)}
    if len(index) != len(labels):
        raise MalformedFile("duplicate fiber id")

    orbits, alpha = [], []
    for entry in doc["orbits"]:
        if not isinstance(entry, dict) or not set(entry) <= _ORBIT_FIELDS:
            raise MalformedFile(f"orbit entries allow only the fields {sorted(_ORBIT_FIELDS)}")
        if not {"from", "to", "shift"} <= set(entry):
            raise MalformedFile("orbit entries need from, to and shift")
        try:
            tail, head = index[str(entry["from"])], index[str(entry["to"])]
        except KeyError as exc:
            raise MalformedFile(f"orbit references unknown fiber id {exc}") from exc
        shift = tuple(int(s) for s in entry["shift"])
        if len(shift) != dim:
            raise MalformedFile("orbit shift has wrong dimension")
        orbits.append(EdgeOrbit(tail, head, shift))
        if "alpha" in entry:
            alpha.append(float(entry["alpha"]))
        else:
            vec = np.asarray(shift, dtype=float) + np.asarray(positions[head]) - np.asarray(positions[tail])
            alpha.append(0.5 * float(np.linalg.norm(vec)))

    try:
        return PeriodicGraph(
            dim=dim,
            labels=tuple(labels),
            positions=np.asarray(positions, dtype=float),
            orbits=tuple(orbits),
            alpha=np.asarray(alpha),
        )
    except ValueError as exc:
        raise MalformedFile(str(exc)) from exc


def graph_to_dict(g: PeriodicGraph) -> dict:
    return {
        "dim": g.dim,
        "fiber": [
            {"id": lab, "pos": [float(c) for c in g.positions[i]]}
            for i, lab in enumerate(g.labels)
        ],
        "orbits": [
            {
                "from": g.labels[orb.tail],
                "to": g.labels[orb.head],
                "shift": list(orb.shift),
                "alpha": float(g.alpha[i]),
            }
            for i, orb in enumerate(g.orbits)
        ],
    }
