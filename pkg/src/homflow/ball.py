"""Unit-ball reconstruction and norm audits for the homogenized cost.

Sampling the cell problem over directions of the circle traces out the unit
ball of the homogenized norm.  Because the ball is a polytope, the sampled
boundary consists of straight runs separated by corners; `detect_vertices`
finds the corners by turning angle and the counts stabilize under sample
refinement, which is the testable surrogate for crystallinity (exact vertex
enumeration of the underlying feasible polytope is out of scope).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cell import f_hom, lower_bound_constant, support_function
from .periodic import PeriodicGraph


@dataclass
class NormBall:
    """Sampled gauge/support data of the unit ball, plus 2d reconstruction."""

    dim: int
    directions: np.ndarray  # (n, d) unit directions
    gauge: np.ndarray  # homogenized norm of each direction
    support: np.ndarray  # support function of the ball at each direction
    boundary: np.ndarray  # directions / gauge, points on the unit sphere of the norm
    polygon: np.ndarray | None = None  # (m, 2) convex hull, d = 2 only
    detected_vertices: np.ndarray | None = None  # indices into boundary

    @property
    def n_samples(self) -> int:
        return len(self.directions)


def circle_directions(n: int) -> np.ndarray:
    theta = 2.0 * math.pi * np.arange(n) / n
    return np.column_stack([np.cos(theta), np.sin(theta)])


def _sphere_directions(n: int) -> np.ndarray:
    # Fibonacci sphere; raw sampling only, no reconstruction in d = 3
    idx = np.arange(n) + 0.5
    phi = math.pi * (3.0 - math.sqrt(5.0)) * idx
    z = 1.0 - 2.0 * idx / n
    r = np.sqrt(1.0 - z * z)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def convex_hull_2d(points: np.ndarray, eps: float = 1e-9) -> np.ndarray:
    """Andrew monotone chain with strict turns; collinear points are dropped."""
    pts = sorted(map(tuple, np.asarray(points, dtype=float)))
    if len(pts) <= 2:
        return np.asarray(pts)

    def build(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                ox, oy = out[-2]
                ax, ay = out[-1]
                if (ax - ox) * (p[1] - oy) - (ay - oy) * (p[0] - ox) <= eps:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = build(pts)
    upper = build(reversed(pts))
    return np.asarray(lower[:-1] + upper[:-1])


def sample_ball(g: PeriodicGraph, n: int) -> NormBall:
    """Evaluate gauge and support at n equispaced directions.

    d = 2 gets a polygon (hull of the boundary points); d = 1 collapses to
    the two directions of the line; d = 3 returns raw samples only.
    """
    if n < 8:
        raise ValueError("need at least 8 sample directions")
    if g.dim == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif g.dim == 2:
        dirs = circle_directions(n)
    elif g.dim == 3:
        dirs = _sphere_directions(n)
    else:
        raise ValueError("ball sampling supports d in {1, 2, 3}")

    gauge = np.array([f_hom(g, u).value for u in dirs])
    support = np.array([support_function(g, u) for u in dirs])
    boundary = dirs / gauge[:, None]
    polygon = convex_hull_2d(boundary) if g.dim == 2 else None
    return NormBall(
        dim=g.dim,
        directions=dirs,
        gauge=gauge,
        support=support,
        boundary=boundary,
        polygon=polygon,
    )


def synthetic_circle_ball(n: int) -> NormBall:
    """Euclidean unit circle as a control case: not the ball of any graph here."""
    dirs = circle_directions(n)
    ones = np.ones(n)
    return NormBall(
        dim=2,
        directions=dirs,
        gauge=ones,
        support=ones.copy(),
        boundary=dirs.copy(),
        polygon=convex_hull_2d(dirs),
    )


@dataclass(frozen=True)
class VertexReport:
    vertex_indices: tuple[int, ...]
    vertex_points: np.ndarray
    facet_count: int
    max_flat_turn: float  # largest turning angle among unflagged points


def detect_vertices(ball: NormBall, angle_tol: float = 1e-6) -> VertexReport:
    """Flag boundary samples whose turning angle exceeds angle_tol.

    Walking the cyclic boundary polygon, points interior to a flat facet turn
    by only the numerical noise of the gauge values, corners by a geometric
    angle.  The facet count equals the number of maximal straight runs, which
    is the number of flagged corners on a closed convex curve.
    """
    if ball.dim != 2:
        raise ValueError("vertex detection needs a 2d ball")
    pts = ball.boundary
    n = len(pts)
    seg = np.roll(pts, -1, axis=0) - pts  # segment i: point i -> i+1
    prev = np.roll(seg, 1, axis=0)
    cross = prev[:, 0] * seg[:, 1] - prev[:, 1] * seg[:, 0]
    dot = np.einsum("ij,ij->i", prev, seg)
    turn = np.abs(np.arctan2(cross, dot))
    flagged = np.nonzero(turn > angle_tol)[0]
    max_flat = float(turn[turn <= angle_tol].max(initial=0.0))
    report = VertexReport(
        vertex_indices=tuple(int(i) for i in flagged),
        vertex_points=pts[flagged],
        facet_count=len(flagged),
        max_flat_turn=max_flat,
    )
    ball.detected_vertices = np.asarray(flagged)
    return report


@dataclass(frozen=True)
class NormAuditReport:
    n_pairs: int
    max_homogeneity_violation: float
    max_triangle_violation: float
    min_unit_gauge: float
    lower_bound_constant: float
    max_lower_bound_violation: float

    def max_violation(self) -> float:
        return max(
            self.max_homogeneity_violation,
            self.max_triangle_violation,
            self.max_lower_bound_violation,
        )

    def passed(self, tol: float = 1e-8) -> bool:
        return self.max_violation() < tol and self.min_unit_gauge > 0.0


def audit_norm(g: PeriodicGraph, n_pairs: int, seed: int = 0) -> NormAuditReport:
    """Check the norm axioms and the Euclidean lower bound on random samples."""
    rng = np.random.default_rng(seed)
    kappa = lower_bound_constant(g)
    hom = tri = low = 0.0
    min_unit = math.inf
    for _ in range(n_pairs):
        j1 = rng.normal(size=g.dim)
        j2 = rng.normal(size=g.dim)
        t = rng.uniform(-3.0, 3.0)
        f1 = f_hom(g, j1).value
        f2 = f_hom(g, j2).value
        hom = max(hom, abs(f_hom(g, t * j1).value - abs(t) * f1))
        tri = max(tri, f_hom(g, j1 + j2).value - f1 - f2)
        low = max(low, kappa * float(np.linalg.norm(j1)) - f1)
        min_unit = min(min_unit, f1 / float(np.linalg.norm(j1)))
    return NormAuditReport(
        n_pairs=n_pairs,
        max_homogeneity_violation=hom,
        max_triangle_violation=max(tri, 0.0),
        min_unit_gauge=min_unit,
        lower_bound_constant=kappa,
        max_lower_bound_violation=max(low, 0.0),
    )


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def write_ball_csv(ball: NormBall, path) -> None:
    if ball.dim != 2:
        raise ValueError("CSV export covers 2d balls")
    lines = ["ux,uy,gauge,bx,by"]
    for u, gv, p in zip(ball.directions, ball.gauge, ball.boundary):
        lines.append(",".join(_fmt(v) for v in (u[0], u[1], gv, p[0], p[1])))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_ball_svg(ball: NormBall, path, graph: PeriodicGraph | None = None) -> None:
    """Standalone SVG: unit axes plus the reconstructed ball at 80% extent.

    Passing the generating graph adds a small unit-cell inset in the corner.
    """
    if ball.dim != 2 or ball.polygon is None:
        raise ValueError("SVG export covers 2d balls")
    size = 1000.0
    half = size / 2.0
    extent = float(np.abs(ball.polygon).max())
    scale = 0.8 * half / extent

    def to_px(p):
        return half + scale * p[0], half - scale * p[1]

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_fmt(size)} {_fmt(size)}">',
        f'<rect width="{_fmt(size)}" height="{_fmt(size)}" fill="white"/>',
        f'<line x1="0" y1="{_fmt(half)}" x2="{_fmt(size)}" y2="{_fmt(half)}" stroke="#bbbbbb" stroke-width="1"/>',
        f'<line x1="{_fmt(half)}" y1="0" x2="{_fmt(half)}" y2="{_fmt(size)}" stroke="#bbbbbb" stroke-width="1"/>',
    ]
    # unit ticks on both axes
    for t in (-1.0, 1.0):
        x, y = to_px((t, 0.0))
        out.append(
            f'<line x1="{_fmt(x)}" y1="{_fmt(half - 8)}" x2="{_fmt(x)}" y2="{_fmt(half + 8)}" stroke="#888888" stroke-width="1"/>'
        )
        x, y = to_px((0.0, t))
        out.append(
            f'<line x1="{_fmt(half - 8)}" y1="{_fmt(y)}" x2="{_fmt(half + 8)}" y2="{_fmt(y)}" stroke="#888888" stroke-width="1"/>'
        )
    pts = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in (to_px(p) for p in ball.polygon))
    out.append(
        f'<polygon points="{pts}" fill="#4477aa" fill-opacity="0.25" stroke="#224488" stroke-width="2"/>'
    )
    for p in ball.boundary:
        px, py = to_px(p)
        out.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="2.5" fill="#224488"/>')

    if graph is not None and graph.dim == 2:
        out.extend(_graph_inset(graph))
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def _graph_inset(g: PeriodicGraph) -> list[str]:
    """Unit cell plus one ring of neighbor cells, drawn in the top-right corner."""
    x0, y0, w = 760.0, 20.0, 220.0
    # inset shows [-1, 2)^2 in cell coordinates
    def to_px(p):
        return x0 + w * (p[0] + 1.0) / 3.0, y0 + w * (2.0 - p[1]) / 3.0

    out = [f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(w)}" height="{_fmt(w)}" fill="#f7f7f7" stroke="#999999"/>']
    cx0, cy0 = to_px((0.0, 1.0))
    cw = w / 3.0
    out.append(
        f'<rect x="{_fmt(cx0)}" y="{_fmt(cy0)}" width="{_fmt(cw)}" height="{_fmt(cw)}" fill="none" stroke="#cc8844" stroke-dasharray="4 3"/>'
    )
    for cell in ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 0), (0, 1), (1, -1), (1, 0), (1, 1)):
        base = np.asarray(cell, dtype=float)
        for orb in g.orbits:
            a = base + g.positions[orb.tail]
            b = base + np.asarray(orb.shift, dtype=float) + g.positions[orb.head]
            if np.all(b >= -1.0) and np.all(b <= 2.0):
                ax, ay = to_px(a)
                bx, by = to_px(b)
                out.append(
                    f'<line x1="{_fmt(ax)}" y1="{_fmt(ay)}" x2="{_fmt(bx)}" y2="{_fmt(by)}" stroke="#555555" stroke-width="1"/>'
                )
        for v in range(g.n_fibers):
            px, py = to_px(base + g.positions[v])
            out.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="3" fill="#cc4444"/>')
    return out
