"""Homogenized transport-cost norms and flow problems on Z^d-periodic graphs."""

from .ball import (
    NormBall,
    audit_norm,
    detect_vertices,
    sample_ball,
    synthetic_circle_ball,
    write_ball_csv,
    write_ball_svg,
)
from .cell import CellSolution, f_hom, rep_feasible, support_function
from .lp import (
    Arc,
    FlowNetwork,
    InfeasibleSupply,
    LinearProgram,
    LpSolution,
    NumericalBreakdown,
    solve_lp,
    solve_min_cost_flow,
)
from .periodic import (
    DiscreteMeasure,
    EdgeOrbit,
    EpsTooLarge,
    MalformedFile,
    NonIncreasingPositions,
    PeriodicFlux,
    PeriodicGraph,
    RescaledGraph,
    build_rescaled,
    divergence,
    effective_flux,
    flux_from_edges,
    load_graph,
    make_1d_nn,
    make_cubic,
    validate_graph,
)
from .transport import (
    DynamicCurve,
    InvalidCurve,
    MassMismatch,
    TransportResult,
    contract_dynamic,
    discrete_energy,
    discretize_points,
    graph_distance,
    kr_distance,
    ma_static,
    support_edge_check,
    torus_fhom_distance,
    w1_coupling,
    w1_dual,
)

__version__ = "0.1.0"
