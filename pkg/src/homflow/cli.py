"""Command-line surface: homogenized norms, unit balls, transport, convergence.

Subcommands
    fhom      evaluate the homogenized norm of a direction
    ball      sample the unit ball, write CSV + SVG, report corner counts
    w1        solve a balanced transport instance (flow / coupling / dual / all)
    converge  table of mesh values against the homogenized limit
    validate  structural checks for a graph file
    demo      regenerate the 2d gallery (deterministic)

Exit codes: 0 success, 2 solver failure, 3 bad input, 4 mass mismatch,
5 validation failure.  All file output is deterministic; floats print with
12 significant digits.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .ball import detect_vertices, sample_ball, write_ball_csv, write_ball_svg
from .cell import CellProblemError, f_hom
from .lp import InfeasibleSupply, NumericalBreakdown
from .periodic import (
    DiscreteMeasure,
    EpsTooLarge,
    MalformedFile,
    NonIncreasingPositions,
    PeriodicGraph,
    RescaledGraph,
    build_rescaled,
    load_graph,
    validate_graph,
)
from .transport import (
    InvalidCurve,
    MassMismatch,
    discretize_points,
    graph_distance,
    ma_static,
    point_cost_w1,
    torus_fhom_distance,
    w1_coupling,
    w1_dual,
)

EXIT_OK = 0
EXIT_SOLVER = 2
EXIT_INPUT = 3
EXIT_MASS = 4
EXIT_VALIDATION = 5

FIXTURE_DIR = Path(__file__).parent / "fixtures"
GALLERY = ("cubic2-axis", "cubic2-linf", "triangular", "honeycomb")


def fixture_path(name: str) -> Path:
    return FIXTURE_DIR / f"{name}.json"


def _fmt(x: float) -> str:
    return f"{x:.12g}"


class InputError(ValueError):
    """Bad command-line input (maps to exit code 3)."""


def parse_eps(text: str) -> Fraction:
    try:
        frac = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"cannot parse mesh size {text!r}") from exc
    if frac.numerator != 1 or frac.denominator < 1:
        raise InputError(f"mesh size must be 1/N for a positive integer N, got {text!r}")
    return frac


def parse_vector(text: str, dim: int | None = None) -> np.ndarray:
    try:
        vec = np.array([float(t) for t in text.split(",")])
    except ValueError as exc:
        raise InputError(f"cannot parse vector {text!r}") from exc
    if dim is not None and len(vec) != dim:
        raise InputError(f"expected {dim} components in {text!r}")
    return vec


_MEASURE_ENTRY_FIELDS = {"vertex", "point", "weight"}
_VERTEX_FIELDS = {"cell", "fiber"}


def load_measure_entries(path):
    """Parse a measures file: JSON list of {vertex|point, weight} entries."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedFile(f"cannot parse {path}: {exc}") from exc
    if not isinstance(doc, list):
        raise MalformedFile("measures file must be a JSON list")
    entries = []
    for entry in doc:
        if not isinstance(entry, dict) or not set(entry) <= _MEASURE_ENTRY_FIELDS:
            raise MalformedFile(
                f"measure entries allow only the fields {sorted(_MEASURE_ENTRY_FIELDS)}"
            )
        if "weight" not in entry or ("vertex" in entry) == ("point" in entry):
            raise MalformedFile("each entry needs a weight and exactly one of vertex/point")
        weight = float(entry["weight"])
        if weight < 0.0:
            raise MalformedFile("weights must be nonnegative")
        if "point" in entry:
            entries.append(("point", [float(c) for c in entry["point"]], weight))
        else:
            v = entry["vertex"]
            if not isinstance(v, dict) or set(v) != _VERTEX_FIELDS:
                raise MalformedFile(f"vertex refs need exactly the fields {sorted(_VERTEX_FIELDS)}")
            entries.append(("vertex", (tuple(int(c) for c in v["cell"]), str(v["fiber"])), weight))
    return entries


def measure_from_entries(rg: RescaledGraph, entries) -> DiscreteMeasure:
    w = np.zeros(rg.n_vertices)
    labels = {lab: i for i, lab in enumerate(rg.base.labels)}
    for kind, payload, weight in entries:
        if kind == "vertex":
            cell, fiber = payload
            if fiber not in labels:
                raise MalformedFile(f"unknown fiber id {fiber!r}")
            if len(cell) != rg.dim:
                raise MalformedFile("vertex cell has wrong dimension")
            w[rg.vertex_index(cell, labels[fiber])] += weight
        else:
            if len(payload) != rg.dim:
                raise MalformedFile("point has wrong dimension")
            w += discretize_points(rg, [(payload, weight)]).weights
    return DiscreteMeasure(w)


def point_set_from_entries(entries):
    points = []
    for kind, payload, weight in entries:
        if kind != "point":
            raise InputError("convergence measures must be torus points")
        points.append((np.asarray(payload, dtype=float), weight))
    return points


@dataclass(frozen=True)
class ConvergenceTable:
    """Rows (eps, value, limit, abs error) with eps strictly decreasing."""

    rows: tuple[tuple[float, float, float, float], ...]
    metadata: dict

    def __post_init__(self):
        eps = [r[0] for r in self.rows]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("eps must be strictly decreasing down the rows")
        if any(r[3] < 0.0 for r in self.rows):
            raise ValueError("errors must be nonnegative")

    def errors(self) -> list[float]:
        return [r[3] for r in self.rows]

    def to_csv(self) -> str:
        lines = ["eps,value,limit,abs_error"]
        for row in self.rows:
            lines.append(",".join(_fmt(v) for v in row))
        return "\n".join(lines) + "\n"


def dirac_convergence(
    g: PeriodicGraph, p, q, eps_list: list[Fraction]
) -> ConvergenceTable:
    """d_eps between snapped endpoints against the homogenized torus distance."""
    evaluator = lambda j: f_hom(g, j).value
    limit = torus_fhom_distance(evaluator, p, q)
    rows = []
    for eps in sorted(set(eps_list), reverse=True):
        rg = build_rescaled(g, eps)
        x = rg.nearest_vertex(p)
        y = rg.nearest_vertex(q)
        value, _ = graph_distance(rg, x, y)
        rows.append((float(eps), value, limit, abs(value - limit)))
    meta = {"mode": "dirac", "p": list(map(float, p)), "q": list(map(float, q))}
    return ConvergenceTable(tuple(rows), meta)


def measure_convergence(
    g: PeriodicGraph, points0, points1, eps_list: list[Fraction]
) -> ConvergenceTable:
    """Discretized transport value against the homogenized point-set W1."""
    evaluator = lambda j: f_hom(g, j).value
    cost = lambda p, q: torus_fhom_distance(evaluator, p, q)
    limit = point_cost_w1(points0, points1, cost)
    rows = []
    for eps in sorted(set(eps_list), reverse=True):
        rg = build_rescaled(g, eps)
        m0 = discretize_points(rg, points0)
        m1 = discretize_points(rg, points1)
        value = ma_static(rg, m0, m1).value
        rows.append((float(eps), value, limit, abs(value - limit)))
    meta = {"mode": "measure", "n0": len(points0), "n1": len(points1)}
    return ConvergenceTable(tuple(rows), meta)


def cmd_fhom(args) -> int:
    g = load_graph(args.graph)
    j = parse_vector(args.j, g.dim)
    sol = f_hom(g, j)
    if args.json:
        record = {
            "value": sol.value,
            "direction": [float(c) for c in sol.direction],
            "flux": {
                f"{orb.tail}->{orb.head}@{','.join(map(str, orb.shift))}": float(v)
                for orb, v in zip(g.orbits, sol.flux.values)
            },
            "residuals": {"div": sol.div_residual, "eff": sol.eff_residual},
        }
        print(json.dumps(record, sort_keys=True))
    else:
        print(f"f_hom({args.j}) = {_fmt(sol.value)}")
        print("optimal flux per orbit:")
        for orb, v in zip(g.orbits, sol.flux.values):
            shift = ",".join(map(str, orb.shift))
            print(
                f"  {g.labels[orb.tail]} -> {g.labels[orb.head]} shift ({shift}): {_fmt(float(v))}"
            )
    return EXIT_OK


def cmd_ball(args) -> int:
    g = load_graph(args.graph)
    if g.dim != 2:
        raise InputError("ball reconstruction requires a 2d graph")
    if args.n < 8:
        raise InputError("need at least 8 sample directions")
    ball = sample_ball(g, args.n)
    report = detect_vertices(ball)
    if args.out_csv:
        write_ball_csv(ball, args.out_csv)
        print(f"wrote {args.out_csv}")
    if args.out_svg:
        write_ball_svg(ball, args.out_svg, graph=g if args.inset else None)
        print(f"wrote {args.out_svg}")
    print(f"vertices: {len(report.vertex_indices)}  facets: {report.facet_count}")
    return EXIT_OK


def cmd_w1(args) -> int:
    g = load_graph(args.graph)
    rg = build_rescaled(g, parse_eps(args.eps))
    m0 = measure_from_entries(rg, load_measure_entries(args.m0))
    m1 = measure_from_entries(rg, load_measure_entries(args.m1))

    solvers = {"flow": ma_static, "coupling": w1_coupling, "dual": w1_dual}
    modes = list(solvers) if args.mode == "all" else [args.mode]
    results = {mode: solvers[mode](rg, m0, m1) for mode in modes}

    if args.json:
        record = {mode: res.to_record() for mode, res in results.items()}
        if args.mode == "all":
            vals = [res.value for res in results.values()]
            record["max_discrepancy"] = max(vals) - min(vals)
        print(json.dumps(record, sort_keys=True))
    else:
        for mode, res in results.items():
            print(f"{mode}: {_fmt(res.value)}")
        if args.mode == "all":
            vals = [res.value for res in results.values()]
            print(f"max discrepancy: {_fmt(max(vals) - min(vals))}")
    return EXIT_OK


def cmd_converge(args) -> int:
    g = load_graph(args.graph)
    p = parse_vector(args.p, g.dim)
    q = parse_vector(args.q, g.dim)
    eps_list = [parse_eps(t) for t in args.eps_list.split(",")]
    if len(set(eps_list)) != len(eps_list):
        raise InputError("eps list contains duplicates")

    table = dirac_convergence(g, p, q, eps_list)
    print(f"# endpoints {args.p} -> {args.q}, limit {_fmt(table.rows[0][2])}")
    print(table.to_csv(), end="")
    out = Path(args.out_csv)
    out.write_text(table.to_csv())
    print(f"wrote {out}")

    if (args.m0 is None) != (args.m1 is None):
        raise InputError("measure mode needs both --m0 and --m1")
    if args.m0 is not None:
        points0 = point_set_from_entries(load_measure_entries(args.m0))
        points1 = point_set_from_entries(load_measure_entries(args.m1))
        mtable = measure_convergence(g, points0, points1, eps_list)
        print(f"# measures {args.m0} -> {args.m1}, limit {_fmt(mtable.rows[0][2])}")
        print(mtable.to_csv(), end="")
        mout = out.with_name(out.stem + "-measures" + out.suffix)
        mout.write_text(mtable.to_csv())
        print(f"wrote {mout}")
    return EXIT_OK


def cmd_validate(args) -> int:
    g = load_graph(args.graph)
    report = validate_graph(g)
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_VALIDATION


def cmd_demo(args) -> int:
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    for name in GALLERY:
        g = load_graph(fixture_path(name))
        ball = sample_ball(g, args.n)
        report = detect_vertices(ball)
        csv_path = outdir / f"{name}-ball.csv"
        svg_path = outdir / f"{name}-ball.svg"
        write_ball_csv(ball, csv_path)
        write_ball_svg(ball, svg_path, graph=g)
        print(
            f"{name}: vertices {len(report.vertex_indices)}, facets {report.facet_count} "
            f"-> {csv_path}, {svg_path}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homflow",
        description="Homogenized transport norms and flow problems on periodic graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fhom", help="evaluate the homogenized norm")
    p.add_argument("--graph", required=True)
    p.add_argument("--j", required=True, help="direction, e.g. 1,0")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_fhom)

    p = sub.add_parser("ball", help="sample the unit ball and export CSV/SVG")
    p.add_argument("--graph", required=True)
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--out-csv")
    p.add_argument("--out-svg")
    p.add_argument("--inset", action="store_true", help="draw the unit cell in the SVG")
    p.set_defaults(func=cmd_ball)

    p = sub.add_parser("w1", help="solve a balanced transport instance")
    p.add_argument("--graph", required=True)
    p.add_argument("--eps", required=True, help="mesh size 1/N")
    p.add_argument("--m0", required=True, help="measures file (JSON)")
    p.add_argument("--m1", required=True, help="measures file (JSON)")
    p.add_argument("--mode", choices=("flow", "coupling", "dual", "all"), default="all")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_w1)

    p = sub.add_parser("converge", help="mesh values against the homogenized limit")
    p.add_argument("--graph", required=True)
    p.add_argument("--p", required=True, help="torus point, e.g. 0,0")
    p.add_argument("--q", required=True, help="torus point, e.g. 0.5,0.25")
    p.add_argument("--eps-list", required=True, help="comma separated, e.g. 1/4,1/8")
    p.add_argument("--out-csv", default="convergence.csv")
    p.add_argument("--m0", help="point-measure file for the measure-mode table")
    p.add_argument("--m1", help="point-measure file for the measure-mode table")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("validate", help="check a graph file")
    p.add_argument("--graph", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("demo", help="regenerate the 2d gallery")
    p.add_argument("--out-dir", default="gallery")
    p.add_argument("--n", type=int, default=128)
    p.set_defaults(func=cmd_demo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; map to the bad-input contract
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except MassMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MASS
    except (MalformedFile, NonIncreasingPositions, EpsTooLarge, InvalidCurve, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalBreakdown, CellProblemError, InfeasibleSupply) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
