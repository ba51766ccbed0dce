"""Boundary-value transport on rescaled torus graphs, three ways.

The central object is the least edge-energy needed to move one discrete mass
to another: minimize sum over oriented edges of alpha^eps |J| subject to
div J = m0 - m1.  Because the cost is a weighted L1 in the flux it equals a
1-Wasserstein distance for the weighted graph metric d_eps (edge weight
2 alpha^eps), which gives three interchangeable solvers:

* `ma_static`    -- min-cost flow directly on the torus graph,
* `w1_coupling`  -- transportation problem over d_eps between the supports,
* `w1_dual`      -- LP over edge-Lipschitz potentials.

Agreement of the three values on every instance is the executable form of
the flow/coupling/duality identities; `support_edge_check` verifies the
sharper structural fact that optimal flows only use edges that are shortest
paths between their own endpoints.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .lp import Arc, FlowNetwork, LinearProgram, OPTIMAL, solve_lp, solve_min_cost_flow
from .periodic import DiscreteMeasure, RescaledGraph


class MassMismatch(ValueError):
    """Transport requires equal total masses."""


class InvalidCurve(ValueError):
    """Dynamic curve violates the discrete continuity equation."""


@dataclass(frozen=True)
class TransportResult:
    value: float
    solver: str  # "flow" | "coupling" | "dual"
    flux: np.ndarray | None = None
    coupling: tuple[tuple[int, int, float], ...] | None = None
    potential: np.ndarray | None = None
    residuals: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "value": self.value,
            "solver": self.solver,
            "residuals": {k: float(v) for k, v in self.residuals.items()},
        }


def _check_balanced(m0: DiscreteMeasure, m1: DiscreteMeasure) -> None:
    scale = max(1.0, m0.total_mass, m1.total_mass)
    if abs(m0.total_mass - m1.total_mass) > 1e-10 * scale:
        raise MassMismatch(
            f"total masses differ: {m0.total_mass!r} vs {m1.total_mass!r}"
        )


def discrete_energy(rg: RescaledGraph, flux) -> float:
    """Rescaled energy of an antisymmetric flux.

    The defining sum runs over both orientations of every edge, so each
    stored representative contributes twice its weighted magnitude.
    """
    vals = np.asarray(flux, dtype=float)
    if vals.shape != (rg.n_edges,):
        raise ValueError("flux needs one value per edge representative")
    return float(2.0 * rg.alpha_eps @ np.abs(vals))


def graph_distance(rg: RescaledGraph, x: int, y: int) -> tuple[float, list[int]]:
    """Weighted graph distance (edge weight 2 alpha^eps) plus a witness path.

    Dijkstra with deterministic tie-breaking on vertex index; the returned
    path lists vertices from x to y.
    """
    if x == y:
        return 0.0, [x]
    weights = 2.0 * rg.alpha_eps
    dist = np.full(rg.n_vertices, math.inf)
    dist[x] = 0.0
    parent = np.full(rg.n_vertices, -1, dtype=np.int64)
    heap: list[tuple[float, int]] = [(0.0, x)]
    done = np.zeros(rg.n_vertices, dtype=bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == y:
            break
        for v, e in rg.adjacency[u]:
            nd = d + weights[e]
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
    path = [y]
    while path[-1] != x:
        path.append(int(parent[path[-1]]))
    path.reverse()
    return float(dist[y]), path


def _distances_from(rg: RescaledGraph, source: int) -> np.ndarray:
    weights = 2.0 * rg.alpha_eps
    dist = np.full(rg.n_vertices, math.inf)
    dist[source] = 0.0
    heap: list[tuple[float, int]] = [(0.0, source)]
    done = np.zeros(rg.n_vertices, dtype=bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, e in rg.adjacency[u]:
            nd = d + weights[e]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def ma_static(rg: RescaledGraph, m0: DiscreteMeasure, m1: DiscreteMeasure) -> TransportResult:
    """Minimal edge energy with div J = m0 - m1, solved as min-cost flow.

    Each edge representative becomes two opposite arcs.  The arc cost per
    unit of flow is 2 alpha^eps: the energy sums over both orientations, so
    net flow f across an edge costs alpha^eps |f| twice.  Getting this factor
    wrong silently breaks the agreement with the coupling and dual solvers.
    """
    _check_balanced(m0, m1)
    supplies = m0.weights - m1.weights
    arcs = []
    for e in range(rg.n_edges):
        t, h = int(rg.edge_tail[e]), int(rg.edge_head[e])
        w = 2.0 * float(rg.alpha_eps[e])
        arcs.append(Arc(t, h, w))
        arcs.append(Arc(h, t, w))
    net = FlowNetwork(rg.n_vertices, supplies, tuple(arcs))
    res = solve_min_cost_flow(net)

    flux = res.flows[0::2] - res.flows[1::2]
    div = rg.incident_divergence(flux)
    div_res = float(np.abs(div - supplies).max())
    value = discrete_energy(rg, flux)
    return TransportResult(
        value=value,
        solver="flow",
        flux=flux,
        residuals={"divergence": div_res, "cost_mismatch": abs(value - res.cost)},
    )


def w1_coupling(rg: RescaledGraph, m0: DiscreteMeasure, m1: DiscreteMeasure) -> TransportResult:
    """1-Wasserstein value via an explicit coupling between the supports.

    The d_eps matrix is restricted to support(m0) x support(m1) (all-pairs
    Dijkstra from the smaller side) and the transportation problem is solved
    as a bipartite min-cost flow.
    """
    _check_balanced(m0, m1)
    s0 = [int(v) for v in m0.support()]
    s1 = [int(v) for v in m1.support()]
    if not s0:
        return TransportResult(value=0.0, solver="coupling", coupling=(), residuals={})

    dmat = np.empty((len(s0), len(s1)))
    for i, v in enumerate(s0):
        dist = _distances_from(rg, v)
        dmat[i, :] = dist[s1]

    supplies = np.concatenate([m0.weights[s0], -m1.weights[s1]])
    arcs = tuple(
        Arc(i, len(s0) + k, float(dmat[i, k]))
        for i in range(len(s0))
        for k in range(len(s1))
    )
    net = FlowNetwork(len(s0) + len(s1), supplies, arcs)
    res = solve_min_cost_flow(net)

    pairs = []
    a = 0
    for i in range(len(s0)):
        for k in range(len(s1)):
            f = float(res.flows[a])
            if f > 0.0:
                pairs.append((s0[i], s1[k], f))
            a += 1
    marg0 = np.zeros(len(s0))
    marg1 = np.zeros(len(s1))
    a = 0
    for i in range(len(s0)):
        for k in range(len(s1)):
            marg0[i] += res.flows[a]
            marg1[k] += res.flows[a]
            a += 1
    res0 = float(np.abs(marg0 - m0.weights[s0]).max(initial=0.0))
    res1 = float(np.abs(marg1 - m1.weights[s1]).max(initial=0.0))
    return TransportResult(
        value=float(res.cost),
        solver="coupling",
        coupling=tuple(pairs),
        residuals={"marginal0": res0, "marginal1": res1},
    )


def w1_dual(rg: RescaledGraph, m0: DiscreteMeasure, m1: DiscreteMeasure) -> TransportResult:
    """Kantorovich dual value: best potential under edge-Lipschitz constraints.

    |phi(y) - phi(x)| <= 2 alpha^eps per edge is equivalent to Lipschitz-1
    for d_eps because distances compose along paths.  The LP maximizes
    sum phi d(m0 - m1); the potential is defined up to an additive constant.
    """
    _check_balanced(m0, m1)
    diff = m0.weights - m1.weights
    n, m = rg.n_vertices, rg.n_edges
    A = np.zeros((2 * m, n))
    b = np.empty(2 * m)
    for e in range(m):
        t, h = int(rg.edge_tail[e]), int(rg.edge_head[e])
        w = 2.0 * float(rg.alpha_eps[e])
        A[2 * e, h] = 1.0
        A[2 * e, t] = -1.0
        b[2 * e] = w
        A[2 * e + 1, h] = -1.0
        A[2 * e + 1, t] = 1.0
        b[2 * e + 1] = w
    lp = LinearProgram(
        c=-diff,
        A=A,
        senses=("<=",) * (2 * m),
        b=b,
        bounds=tuple((-math.inf, math.inf) for _ in range(n)),
    )
    sol = solve_lp(lp)
    if sol.status != OPTIMAL:
        raise RuntimeError(f"dual LP reported {sol.status}")
    phi = sol.x
    slack = float(np.max(A @ phi - b, initial=0.0))
    return TransportResult(
        value=-float(sol.value),
        solver="dual",
        potential=phi,
        residuals={"constraint": max(slack, 0.0), "lp_gap": sol.duality_gap},
    )


def support_edge_check(rg: RescaledGraph, result: TransportResult, tol: float = 1e-8):
    """Verify d_eps(x, y) = 2 alpha^eps on every edge carrying optimal flow.

    Optimality forces every used edge to be a geodesic between its own
    endpoints; a violation means the flow routes through an edge that a
    shorter path undercuts.  Returns the list of violations (expected empty
    for ma_static output).
    """
    if result.flux is None:
        raise ValueError("support_edge_check needs a flow-solver result")
    violations = []
    for e in range(rg.n_edges):
        if abs(result.flux[e]) <= 1e-9:
            continue
        t, h = int(rg.edge_tail[e]), int(rg.edge_head[e])
        w = 2.0 * float(rg.alpha_eps[e])
        dist, _ = graph_distance(rg, t, h)
        if abs(dist - w) > tol:
            violations.append((e, dist, w))
    return violations


@dataclass(frozen=True)
class DynamicCurve:
    """Piecewise-linear masses and piecewise-constant fluxes on a time grid.

    On each interval the discrete continuity equation must hold:
    (m_{k+1} - m_k) / dt_k + div J_k = 0 at every vertex.
    """

    graph: RescaledGraph
    time_grid: np.ndarray
    masses: tuple[DiscreteMeasure, ...]
    fluxes: tuple[np.ndarray, ...]

    def __post_init__(self):
        t = np.asarray(self.time_grid, dtype=float)
        if t.ndim != 1 or len(t) < 2 or t[0] != 0.0 or t[-1] != 1.0:
            raise InvalidCurve("time grid must run from 0 to 1")
        if np.any(np.diff(t) <= 0.0):
            raise InvalidCurve("time grid must be strictly increasing")
        if len(self.masses) != len(t) or len(self.fluxes) != len(t) - 1:
            raise InvalidCurve("need one mass per breakpoint and one flux per interval")
        object.__setattr__(self, "time_grid", t)
        object.__setattr__(self, "masses", tuple(self.masses))
        object.__setattr__(self, "fluxes", tuple(np.asarray(J, dtype=float) for J in self.fluxes))

    def continuity_residual(self) -> float:
        res = 0.0
        for k in range(len(self.fluxes)):
            dt = self.time_grid[k + 1] - self.time_grid[k]
            rate = (self.masses[k + 1].weights - self.masses[k].weights) / dt
            res = max(res, float(np.abs(rate + self.graph.incident_divergence(self.fluxes[k])).max()))
        return res

    def mass_drift(self) -> float:
        totals = [m.total_mass for m in self.masses]
        return float(max(totals) - min(totals))


@dataclass(frozen=True)
class ContractionResult:
    curve: DynamicCurve
    flux: np.ndarray
    energy_before: float
    energy_after: float
    div_residual: float


def contract_dynamic(curve: DynamicCurve) -> ContractionResult:
    """Collapse a dynamic curve to the affine curve with time-averaged flux.

    The averaged flux has divergence m_0 - m_1 (the interval identities
    telescope) and, by convexity of the energy, never costs more than the
    time-averaged energy of the original curve.
    """
    if curve.continuity_residual() > 1e-9:
        raise InvalidCurve("curve violates the discrete continuity equation")
    if curve.mass_drift() > 1e-10 * max(1.0, curve.masses[0].total_mass):
        raise InvalidCurve("total mass is not constant along the curve")

    rg = curve.graph
    dts = np.diff(curve.time_grid)
    avg = np.zeros(rg.n_edges)
    energy_before = 0.0
    for dt, J in zip(dts, curve.fluxes):
        avg += dt * J
        energy_before += dt * discrete_energy(rg, J)
    energy_after = discrete_energy(rg, avg)

    m0, m1 = curve.masses[0], curve.masses[-1]
    div_res = float(np.abs(rg.incident_divergence(avg) - (m0.weights - m1.weights)).max())
    affine = DynamicCurve(
        graph=rg,
        time_grid=np.array([0.0, 1.0]),
        masses=(m0, m1),
        fluxes=(avg,),
    )
    return ContractionResult(
        curve=affine,
        flux=avg,
        energy_before=energy_before,
        energy_after=energy_after,
        div_residual=div_res,
    )


def torus_wrap(v: np.ndarray) -> np.ndarray:
    """Reduce a displacement to the centered fundamental domain [-1/2, 1/2)^d."""
    w = np.asarray(v, dtype=float) % 1.0
    return w - np.round(w)


def torus_fhom_distance(fhom_eval, p, q, shift_radius: int = 1) -> float:
    """Torus distance induced by the homogenized norm: min over integer shifts.

    The displacement is first reduced to the centered cell; shift_radius = 1
    then suffices whenever the norm dominates the Euclidean one (true for the
    half-edge-length weight convention), since a minimizing shift cannot move
    the argument further out than the norm ball geometry allows.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    w = torus_wrap(q - p)
    best = math.inf
    for k in np.ndindex(*([2 * shift_radius + 1] * len(w))):
        shift = np.asarray(k, dtype=float) - shift_radius
        best = min(best, float(fhom_eval(w + shift)))
    return best


def torus_euclidean(p, q) -> float:
    """Euclidean distance on the torus; coordinates minimize independently."""
    return float(np.linalg.norm(torus_wrap(np.asarray(q, float) - np.asarray(p, float))))


def kr_distance(mu, nu) -> float:
    """1-Wasserstein distance between weighted torus point sets (Euclidean metric).

    mu and nu are sequences of (point, weight) with equal totals; solved as a
    bipartite min-cost flow.  This is the metric that witnesses weak
    convergence of measures in the convergence experiments.
    """
    mu = [(np.atleast_1d(np.asarray(p, float)), float(w)) for p, w in mu]
    nu = [(np.atleast_1d(np.asarray(p, float)), float(w)) for p, w in nu]
    tot0 = sum(w for _, w in mu)
    tot1 = sum(w for _, w in nu)
    if abs(tot0 - tot1) > 1e-10 * max(1.0, tot0, tot1):
        raise MassMismatch(f"total masses differ: {tot0!r} vs {tot1!r}")
    if not mu:
        return 0.0
    supplies = np.array([w for _, w in mu] + [-w for _, w in nu])
    arcs = tuple(
        Arc(i, len(mu) + k, torus_euclidean(p, q))
        for i, (p, _) in enumerate(mu)
        for k, (q, _) in enumerate(nu)
    )
    net = FlowNetwork(len(mu) + len(nu), supplies, arcs)
    return float(solve_min_cost_flow(net).cost)


def point_cost_w1(points0, points1, cost) -> float:
    """Transport value between weighted point sets under an arbitrary cost."""
    tot0 = sum(w for _, w in points0)
    tot1 = sum(w for _, w in points1)
    if abs(tot0 - tot1) > 1e-10 * max(1.0, tot0, tot1):
        raise MassMismatch(f"total masses differ: {tot0!r} vs {tot1!r}")
    if not points0:
        return 0.0
    supplies = np.array([w for _, w in points0] + [-w for _, w in points1])
    arcs = tuple(
        Arc(i, len(points0) + k, float(cost(p, q)))
        for i, (p, _) in enumerate(points0)
        for k, (q, _) in enumerate(points1)
    )
    net = FlowNetwork(len(points0) + len(points1), supplies, arcs)
    return float(solve_min_cost_flow(net).cost)


def discretize_points(rg: RescaledGraph, points) -> DiscreteMeasure:
    """Place each point mass on the fiber-0 vertex of its containing mesh cube.

    Mirrors the cube-based embedding of discrete measures at the level of
    point masses: the cell index is floor(coordinate / eps) modulo the torus.
    """
    w = np.zeros(rg.n_vertices)
    for p, mass in points:
        p = np.atleast_1d(np.asarray(p, dtype=float)) % 1.0
        cell = tuple(int(math.floor(c * rg.n_cells)) % rg.n_cells for c in p)
        w[rg.vertex_index(cell, 0)] += float(mass)
    return DiscreteMeasure(w)
