"""The unit-cell minimization behind the homogenized transport norm.

For a direction j in R^d, the homogenized cost is the least weighted-L1
energy of a periodic divergence-free flux whose cell-averaged transport
vector equals j:

    value(j) = min { sum over cell edges of alpha |J|
                     : div J = 0,  effective_flux(J) = j }.

With one signed variable per orbit this is a small LP: |V| divergence
equality rows (one dropped, they always sum to zero) plus d effective-flux
rows.  The minimum is attained and defines a norm in j; the associated unit
ball is a polytope whose support function is itself an LP over the same
feasible set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LinearProgram, solve_lp
from .periodic import PeriodicFlux, PeriodicGraph, divergence, effective_flux


class CellProblemError(RuntimeError):
    """The cell LP failed in a way that contradicts graph validity."""


@dataclass(frozen=True)
class CellSolution:
    value: float
    flux: PeriodicFlux
    direction: np.ndarray
    div_residual: float
    eff_residual: float
    energy_mismatch: float


def _cell_matrix(g: PeriodicGraph) -> tuple[np.ndarray, np.ndarray]:
    """Constraint block (rows: |V|-1 divergence + d effective flux) and costs.

    Variables are the split J = P - M with P, M >= 0, so the weighted-L1
    objective is linear: each orbit contributes both of its orientations,
    hence the factor 2 on alpha.
    """
    div_rows = g.fiber_incidence[:-1, :]
    eff_rows = g.orbit_vectors.T
    A_j = np.vstack([div_rows, eff_rows])
    A = np.hstack([A_j, -A_j])
    costs = np.concatenate([2.0 * g.alpha, 2.0 * g.alpha])
    return A, costs


def f_hom(g: PeriodicGraph, j) -> CellSolution:
    """Solve the cell problem for direction j and certify the optimizer.

    Raises CellProblemError if the LP reports infeasible or unbounded, which
    cannot happen for a validated connected graph and indicates an internal
    inconsistency.
    """
    j = np.atleast_1d(np.asarray(j, dtype=float))
    if j.shape != (g.dim,):
        raise ValueError(f"direction must have dimension {g.dim}")

    A, costs = _cell_matrix(g)
    b = np.concatenate([np.zeros(g.n_fibers - 1), j])
    lp = LinearProgram(c=costs, A=A, senses=("=",) * len(b), b=b)
    sol = solve_lp(lp)
    if sol.status in (INFEASIBLE, UNBOUNDED):
        raise CellProblemError(
            f"cell LP reported {sol.status} for j={j.tolist()}; "
            "the graph cannot be connected"
        )

    n = g.n_orbits
    flux = PeriodicFlux(g, sol.x[:n] - sol.x[n:])
    div_res = float(np.abs(divergence(g, flux)).max())
    eff_res = float(np.linalg.norm(effective_flux(g, flux) - j))
    energy = float(2.0 * g.alpha @ np.abs(flux.values))
    return CellSolution(
        value=float(sol.value),
        flux=flux,
        direction=j,
        div_residual=div_res,
        eff_residual=eff_res,
        energy_mismatch=abs(float(sol.value) - energy),
    )


def rep_feasible(g: PeriodicGraph, flux: PeriodicFlux, j, tol: float = 1e-9):
    """Check whether a periodic flux represents direction j.

    Returns (ok, residuals) where residuals holds the max divergence entry
    and the Euclidean defect of the effective flux.
    """
    j = np.atleast_1d(np.asarray(j, dtype=float))
    div_res = float(np.abs(divergence(g, flux)).max())
    eff_res = float(np.linalg.norm(effective_flux(g, flux) - j))
    return (div_res <= tol and eff_res <= tol), {"div": div_res, "eff": eff_res}


def support_function(g: PeriodicGraph, u) -> float:
    """Support function of the unit ball: max <u, Eff(J)> over F(J) <= 1.

    Finite, positively homogeneous and convex in u; the ball itself is the
    image of the energy sublevel set under the effective-flux map.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (g.dim,):
        raise ValueError(f"direction must have dimension {g.dim}")

    div_rows = g.fiber_incidence[:-1, :]
    gains = g.orbit_vectors @ u
    n = g.n_orbits

    A = np.vstack(
        [
            np.hstack([div_rows, -div_rows]),
            np.concatenate([2.0 * g.alpha, 2.0 * g.alpha]).reshape(1, 2 * n),
        ]
    )
    senses = ("=",) * (g.n_fibers - 1) + ("<=",)
    b = np.concatenate([np.zeros(g.n_fibers - 1), [1.0]])
    lp = LinearProgram(c=np.concatenate([-gains, gains]), A=A, senses=senses, b=b)
    sol = solve_lp(lp)
    if sol.status != OPTIMAL:
        raise CellProblemError(f"support LP reported {sol.status}")
    return -float(sol.value)


def lower_bound_constant(g: PeriodicGraph) -> float:
    """Constant kappa with value(j) >= kappa |j|_2 for every direction.

    Follows from bounding <u, Eff(J)> by the energy: kappa equals 2 divided
    by the largest ratio of embedded edge length to weight.  With the weight
    convention alpha = |edge|/2 this gives exactly kappa = 1.
    """
    lengths = np.linalg.norm(g.orbit_vectors, axis=1)
    return 2.0 / float(np.max(lengths / g.alpha))
