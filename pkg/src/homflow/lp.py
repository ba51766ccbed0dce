"""Self-contained linear optimization: a small dense simplex and a min-cost flow.

Every optimization in the repo reduces to one of the two engines here.  The
problems are tiny (at most a few hundred variables), so the design goal is
determinism and certified output, not speed:

* `solve_lp` is a two-phase primal simplex on a dense tableau with Bland's
  anti-cycling rule.  Identical inputs pivot identically.  On success the
  solution is refreshed from the final basis by solving linear systems
  against the original data, which gives residuals at machine precision
  instead of accumulated tableau drift.
* `solve_min_cost_flow` is successive shortest paths with node potentials;
  all arc costs are nonnegative so Dijkstra applies from the start.

Tolerances are fixed: pivot threshold 1e-12, feasibility 1e-9, reported
agreement 1e-8.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

PIVOT_TOL = 1e-12
FEAS_TOL = 1e-9
REPORT_TOL = 1e-8

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class NumericalBreakdown(RuntimeError):
    """Simplex could not find an acceptable pivot (magnitude below 1e-12)."""


class InfeasibleSupply(RuntimeError):
    """No feasible flow: some excess cannot reach any deficit."""


@dataclass(frozen=True)
class LinearProgram:
    """min c.x  s.t.  A x (sense) b,  lo <= x <= hi.

    senses is a string per row among '=', '<=', '>='.  Bounds default to
    x >= 0; use (-inf, inf) for free variables.
    """

    c: np.ndarray
    A: np.ndarray
    senses: tuple[str, ...]
    b: np.ndarray
    bounds: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        A = np.asarray(self.A, dtype=float).reshape(len(self.b), len(c))
        b = np.asarray(self.b, dtype=float)
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("LP data must be finite")
        bounds = self.bounds
        if bounds is None:
            bounds = tuple((0.0, math.inf) for _ in c)
        else:
            bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
            if len(bounds) != len(c):
                raise ValueError("one bound pair per variable required")
        for s in self.senses:
            if s not in ("=", "<=", ">="):
                raise ValueError(f"unknown row sense {s!r}")
        if len(self.senses) != len(b):
            raise ValueError("one sense per row required")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "senses", tuple(self.senses))
        object.__setattr__(self, "bounds", bounds)

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def n_rows(self) -> int:
        return len(self.b)


@dataclass(frozen=True)
class LpSolution:
    status: str
    x: np.ndarray | None = None
    value: float | None = None
    duals: np.ndarray | None = None
    certificate: np.ndarray | None = None
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    duality_gap: float = 0.0
    iterations: int = 0


class _Standardized:
    """Reduction of a general LP to min c.x, A x = b, x >= 0.

    Per variable: lo = 0 is used directly, a finite lo shifts, a finite hi
    with lo = -inf mirrors, a doubly-finite range shifts plus adds an upper
    bound row, and a free variable splits into a positive and negative part.
    """

    def __init__(self, lp: LinearProgram):
        cols: list[np.ndarray] = []
        costs: list[float] = []
        self.back: list[list[tuple[int, float]]] = []  # x_orig[j] = shift + sum sign*x_std
        self.shift = np.zeros(lp.n_vars)

        A = lp.A
        extra_rows: list[tuple[np.ndarray, str, float]] = []
        for j, (lo, hi) in enumerate(lp.bounds):
            col = A[:, j]
            if lo == 0.0 and hi == math.inf:
                self.back.append([(len(cols), 1.0)])
                cols.append(col)
                costs.append(lp.c[j])
            elif math.isfinite(lo) and hi == math.inf:
                self.shift[j] = lo
                self.back.append([(len(cols), 1.0)])
                cols.append(col)
                costs.append(lp.c[j])
            elif lo == -math.inf and math.isfinite(hi):
                self.shift[j] = hi
                self.back.append([(len(cols), -1.0)])
                cols.append(-col)
                costs.append(-lp.c[j])
            elif math.isfinite(lo) and math.isfinite(hi):
                if hi < lo:
                    raise ValueError(f"variable {j} has empty bound range")
                self.shift[j] = lo
                k = len(cols)
                self.back.append([(k, 1.0)])
                cols.append(col)
                costs.append(lp.c[j])
                extra_rows.append((np.array([k]), "<=", hi - lo))
            else:
                k = len(cols)
                self.back.append([(k, 1.0), (k + 1, -1.0)])
                cols.append(col)
                costs.append(lp.c[j])
                cols.append(-col)
                costs.append(-lp.c[j])

        n_std = len(cols)
        m0 = lp.n_rows
        m = m0 + len(extra_rows)
        self.n_structural = n_std
        self.n_original_rows = m0

        A_std = np.zeros((m, n_std))
        if n_std:
            A_std[:m0, :] = np.column_stack(cols) if cols else np.zeros((m0, 0))
        b_std = np.zeros(m)
        b_std[:m0] = lp.b - A @ self.shift
        senses = list(lp.senses)
        for r, (idx, sense, rhs) in enumerate(extra_rows):
            A_std[m0 + r, idx[0]] = 1.0
            b_std[m0 + r] = rhs
            senses.append(sense)

        # orient every row so that b >= 0 (sign tracked for dual recovery)
        self.row_sign = np.ones(m)
        for i in range(m):
            if b_std[i] < 0.0:
                A_std[i, :] *= -1.0
                b_std[i] *= -1.0
                self.row_sign[i] = -1.0
                if senses[i] == "<=":
                    senses[i] = ">="
                elif senses[i] == ">=":
                    senses[i] = "<="

        # slack / surplus columns; artificials fill the remaining basis slots
        slack_cols = []
        self.slack_of_row = [-1] * m
        for i, s in enumerate(senses):
            if s == "<=":
                e = np.zeros(m)
                e[i] = 1.0
                self.slack_of_row[i] = n_std + len(slack_cols)
                slack_cols.append(e)
            elif s == ">=":
                e = np.zeros(m)
                e[i] = -1.0
                self.slack_of_row[i] = n_std + len(slack_cols)
                slack_cols.append(e)

        blocks = [A_std] + ([np.column_stack(slack_cols)] if slack_cols else [])
        self.A = np.hstack(blocks) if blocks else A_std
        self.b = b_std
        self.c = np.concatenate([np.asarray(costs), np.zeros(len(slack_cols))])
        self.senses = senses
        self.value_shift = float(lp.c @ self.shift)

    def restore(self, x_std: np.ndarray, n_vars: int) -> np.ndarray:
        x = self.shift.copy()
        for j in range(n_vars):
            for k, sign in self.back[j]:
                x[j] += sign * x_std[k]
        return x

    def restore_ray(self, ray_std: np.ndarray, n_vars: int) -> np.ndarray:
        ray = np.zeros(n_vars)
        for j in range(n_vars):
            for k, sign in self.back[j]:
                ray[j] += sign * ray_std[k]
        return ray


def _pivot(tab: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tab[row, :] /= tab[row, col]
    colvals = tab[:, col].copy()
    colvals[row] = 0.0
    tab -= np.outer(colvals, tab[row, :])
    basis[row] = col


def _simplex_phase(
    tab: np.ndarray,
    basis: np.ndarray,
    costs: np.ndarray,
    allowed: np.ndarray,
    iter_cap: int,
) -> tuple[str, int]:
    """Run Bland-rule pivots until optimal or unbounded.

    tab is [A | b] with an identity embedded at the basis columns.  Returns
    (status, iterations); status 'optimal' means no improving column remains.
    """
    m = tab.shape[0]
    n = tab.shape[1] - 1
    iters = 0
    while True:
        if iters > iter_cap:
            raise NumericalBreakdown(f"iteration cap {iter_cap} exceeded")
        # reduced costs recomputed from the tableau: r = c - c_B . (B^-1 A)
        r = costs - costs[basis] @ tab[:, :n]
        entering = -1
        blocked = 0
        for j in range(n):
            if not allowed[j] or r[j] >= -FEAS_TOL:
                continue
            colpos = tab[:, j] > PIVOT_TOL
            if not np.any(colpos):
                if np.any(tab[:, j] > 0.0):
                    blocked += 1  # only sub-threshold pivots available
                    continue
                return UNBOUNDED, j
            entering = j
            break
        if entering < 0:
            if blocked:
                raise NumericalBreakdown(
                    f"{blocked} improving columns blocked by pivots below {PIVOT_TOL:g}"
                )
            return OPTIMAL, iters
        col = tab[:, entering]
        ratios = np.full(m, math.inf)
        ok = col > PIVOT_TOL
        ratios[ok] = tab[ok, n] / col[ok]
        best = ratios.min()
        # Bland: among min-ratio rows leave the smallest basis variable
        tied = [i for i in range(m) if ok[i] and ratios[i] <= best + PIVOT_TOL]
        leave = min(tied, key=lambda i: basis[i])
        _pivot(tab, basis, leave, entering)
        iters += 1


def solve_lp(lp: LinearProgram) -> LpSolution:
    """Two-phase Bland simplex with basis-refreshed certificates.

    Returns Optimal with primal values, row duals, residuals and duality gap;
    Infeasible with a Farkas-style dual certificate; or Unbounded with an
    improving ray in original variable space.
    """
    std = _Standardized(lp)
    m, n = std.A.shape
    iter_cap = 2000 + 200 * (m + n)

    # phase 1: artificial columns complete the identity basis
    art_cols = np.eye(m)
    tab = np.hstack([std.A, art_cols, std.b.reshape(-1, 1)])
    basis = np.arange(n, n + m)
    # rows whose slack enters with +1 coefficient can seed the basis directly
    for i in range(m):
        j = std.slack_of_row[i]
        if j >= 0 and std.A[i, j] > 0.0:
            basis[i] = j
    phase1_costs = np.concatenate([np.zeros(n), np.ones(m)])
    allowed = np.ones(n + m, dtype=bool)
    # re-canonicalize the tableau for the seeded basis (identity already there)
    status, it1 = _simplex_phase(tab, basis, phase1_costs, allowed, iter_cap)
    if status == UNBOUNDED:
        raise NumericalBreakdown("phase 1 reported unbounded; data inconsistent")
    art_value = float(phase1_costs[basis] @ tab[:, -1])
    scale = 1.0 + float(np.abs(std.b).max(initial=0.0))
    if art_value > FEAS_TOL * scale:
        # Farkas certificate from the phase-1 duals
        y = _basis_duals(std, basis, phase1_costs, n, m)
        y = std.row_sign[: std.n_original_rows] * y[: std.n_original_rows]
        return LpSolution(status=INFEASIBLE, certificate=y, iterations=it1)

    # drive leftover artificials out of the basis where possible
    for i in range(m):
        if basis[i] >= n:
            pivot_col = -1
            for j in range(n):
                if allowed[j] and abs(tab[i, j]) > PIVOT_TOL:
                    pivot_col = j
                    break
            if pivot_col >= 0:
                _pivot(tab, basis, i, pivot_col)
            # else: redundant row, artificial stays basic at zero

    # phase 2: original costs, artificials barred from entering
    allowed[n:] = False
    phase2_costs = np.concatenate([std.c, np.zeros(m)])
    status, res2 = _simplex_phase(tab, basis, phase2_costs, allowed, iter_cap)
    if status == UNBOUNDED:
        j = res2
        ray_std = np.zeros(n)
        ray_std[j] = 1.0
        for i in range(m):
            if basis[i] < n:
                ray_std[basis[i]] = -tab[i, j]
        ray = std.restore_ray(ray_std[: std.n_structural], lp.n_vars)
        return LpSolution(status=UNBOUNDED, certificate=ray, iterations=it1)

    # refresh primal and dual values from the final basis against original data
    x_std = np.zeros(n + m)
    B = np.column_stack([std.A[:, j] if j < n else art_cols[:, j - n] for j in basis])
    x_b = np.linalg.solve(B, std.b)
    x_std[basis] = x_b
    y = _basis_duals(std, basis, phase2_costs, n, m)

    x = std.restore(x_std[: std.n_structural], lp.n_vars)
    value = float(std.c @ x_std[:n]) + std.value_shift
    primal_res = _primal_residual(lp, x)
    reduced = np.concatenate([std.c, np.full(m, np.inf)]) - np.concatenate(
        [y @ std.A, y @ art_cols]
    )
    dual_res = float(max(0.0, -(reduced[:n].min(initial=0.0))))
    dual_value = float(y @ std.b) + std.value_shift
    gap = abs(value - dual_value)

    duals = std.row_sign[: std.n_original_rows] * y[: std.n_original_rows]
    sol = LpSolution(
        status=OPTIMAL,
        x=x,
        value=value,
        duals=duals,
        primal_residual=primal_res,
        dual_residual=dual_res,
        duality_gap=gap,
        iterations=it1 + res2,
    )
    obj_scale = 1.0 + abs(value)
    if primal_res > FEAS_TOL * scale or gap > REPORT_TOL * obj_scale:
        raise NumericalBreakdown(
            f"certificate check failed: residual {primal_res:g}, gap {gap:g}"
        )
    return sol


def _basis_duals(std: _Standardized, basis, costs, n, m) -> np.ndarray:
    cols = []
    for j in basis:
        if j < n:
            cols.append(std.A[:, j])
        else:
            e = np.zeros(m)
            e[j - n] = 1.0
            cols.append(e)
    B = np.column_stack(cols)
    return np.linalg.solve(B.T, costs[basis])


def _primal_residual(lp: LinearProgram, x: np.ndarray) -> float:
    res = 0.0
    ax = lp.A @ x
    for i, s in enumerate(lp.senses):
        gap = ax[i] - lp.b[i]
        if s == "=":
            res = max(res, abs(gap))
        elif s == "<=":
            res = max(res, gap)
        else:
            res = max(res, -gap)
    for j, (lo, hi) in enumerate(lp.bounds):
        if math.isfinite(lo):
            res = max(res, lo - x[j])
        if math.isfinite(hi):
            res = max(res, x[j] - hi)
    return float(max(res, 0.0))


@dataclass(frozen=True)
class Arc:
    tail: int
    head: int
    cost: float
    capacity: float = math.inf

    def __post_init__(self):
        if self.cost < 0.0:
            raise ValueError("arc costs must be nonnegative")
        if not self.capacity > 0.0:
            raise ValueError("arc capacity must be positive")


@dataclass(frozen=True)
class FlowNetwork:
    """Transshipment instance: node supplies balancing to zero, priced arcs."""

    n_nodes: int
    supplies: np.ndarray
    arcs: tuple[Arc, ...]

    def __post_init__(self):
        s = np.asarray(self.supplies, dtype=float).copy()
        if s.shape != (self.n_nodes,):
            raise ValueError("one supply per node required")
        scale = max(1.0, float(np.abs(s).max(initial=0.0)))
        if abs(s.sum()) > 1e-10 * scale:
            raise ValueError(f"supplies must balance, off by {s.sum():g}")
        for a in self.arcs:
            if not (0 <= a.tail < self.n_nodes and 0 <= a.head < self.n_nodes):
                raise ValueError("arc endpoint out of range")
        s.setflags(write=False)
        object.__setattr__(self, "supplies", s)
        object.__setattr__(self, "arcs", tuple(self.arcs))


@dataclass(frozen=True)
class FlowResult:
    flows: np.ndarray
    cost: float
    potentials: np.ndarray


def solve_min_cost_flow(net: FlowNetwork) -> FlowResult:
    """Successive shortest paths with potentials; deterministic tie-breaking.

    Repeatedly routes the lowest-index excess node to its nearest deficit
    node along a shortest path in reduced costs, which stay nonnegative
    because potentials absorb each Dijkstra pass.
    """
    n = net.n_nodes
    arcs = net.arcs
    flows = np.zeros(len(arcs))
    excess = net.supplies.copy()
    pot = np.zeros(n)

    # adjacency over residual slots: (arc index, +1 forward / -1 backward)
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for i, a in enumerate(arcs):
        adj[a.tail].append((i, +1))
        adj[a.head].append((i, -1))

    tol = 1e-11 * max(1.0, float(np.abs(net.supplies).max(initial=0.0)))

    def residual(i: int, direction: int) -> float:
        return (arcs[i].capacity - flows[i]) if direction > 0 else flows[i]

    while True:
        sources = np.nonzero(excess > tol)[0]
        if len(sources) == 0:
            break
        s = int(sources[0])

        dist = np.full(n, math.inf)
        dist[s] = 0.0
        parent: list[tuple[int, int] | None] = [None] * n
        heap: list[tuple[float, int]] = [(0.0, s)]
        final = np.zeros(n, dtype=bool)
        target = -1
        while heap:
            d, u = heapq.heappop(heap)
            if final[u]:
                continue
            final[u] = True
            if excess[u] < -tol:
                target = u
                break
            for i, direction in adj[u]:
                if residual(i, direction) <= tol:
                    continue
                v = arcs[i].head if direction > 0 else arcs[i].tail
                if final[v]:
                    continue
                rc = direction * arcs[i].cost + pot[u] - pot[v]
                nd = d + max(rc, 0.0)
                if nd < dist[v] - 1e-15:
                    dist[v] = nd
                    parent[v] = (i, direction)
                    heapq.heappush(heap, (nd, v))
        if target < 0:
            raise InfeasibleSupply(
                f"excess at node {s} cannot reach any deficit node"
            )

        # potentials absorb finalized distances, capped at the target's
        dt = dist[target]
        pot += np.minimum(dist, dt)

        bottleneck = min(excess[s], -excess[target])
        v = target
        while v != s:
            i, direction = parent[v]
            bottleneck = min(bottleneck, residual(i, direction))
            v = arcs[i].tail if direction > 0 else arcs[i].head
        v = target
        while v != s:
            i, direction = parent[v]
            flows[i] += direction * bottleneck
            v = arcs[i].tail if direction > 0 else arcs[i].head
        excess[s] -= bottleneck
        excess[target] += bottleneck

    cost = float(sum(a.cost * f for a, f in zip(arcs, flows)))
    return FlowResult(flows=flows, cost=cost, potentials=pot)
