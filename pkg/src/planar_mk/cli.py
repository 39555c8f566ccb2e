"""Command-line entry point.

Subcommands: solve, oracle, check-el, check-lemmas, compare. Inputs are
density files (JSON or CSV) or LP instance files; outputs are plot-ready CSV
grids plus a versioned report.json whose timing fields are isolated so that
reports from a fixed seed are byte-identical apart from timing.

Exit codes: 0 success / converged, 1 I/O or validation failure, 2 solver hit
max_iters, 3 oracle size limit, 4 compare gap above tolerance.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .coupling import FeasibilityError, MarginalMismatchError
from .density_io import (
    DensityFormatError,
    read_density,
    read_grid_csv,
    write_grid_csv,
)
from .measures import DiscreteDensity2D, build_cdf, marginals_2d, w2_squared_1d
from .optimizer import NoDescentError, SolverConfig, ipfp_project, solve
from .oracle import (
    SizeLimitError,
    TransportInstance,
    UnbalancedInstanceError,
    solve_full_2d,
    solve_lp,
)
from .reduction import build_g_map, build_h_map, coupling_cost
from .variational import (
    euler_lagrange_residual,
    first_variation,
    lemma1_checker,
    lemma2_checker,
)

SCHEMA_VERSION = 1


def _write_report(out_dir: Path, body: dict, seconds: float) -> Path:
    report = dict(body)
    report["schema"] = SCHEMA_VERSION
    report["timing"] = {"seconds": seconds}
    path = out_dir / "report.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return path


def _load_density_2d(path: str) -> DiscreteDensity2D:
    d = read_density(path)
    if not isinstance(d, DiscreteDensity2D):
        raise DensityFormatError(f"{path}: expected a 2-D density")
    return d


def _grid_spec(d: DiscreteDensity2D) -> dict:
    return {
        "x": {"min": float(d.grid_x.nodes[0]), "max": float(d.grid_x.nodes[-1]), "n": d.grid_x.n_cells},
        "y": {"min": float(d.grid_y.nodes[0]), "max": float(d.grid_y.nodes[-1]), "n": d.grid_y.n_cells},
    }


def _per_axis_w2_sum(f: DiscreteDensity2D, f_tilde: DiscreteDensity2D, n_quad: int = 4096) -> float:
    f1, f2 = marginals_2d(f)
    g1, g2 = marginals_2d(f_tilde)
    return w2_squared_1d(build_cdf(f1), build_cdf(g1), n_quad) + w2_squared_1d(
        build_cdf(f2), build_cdf(g2), n_quad
    )


def _solve_pair(f: DiscreteDensity2D, f_tilde: DiscreteDensity2D, args) -> tuple:
    config = SolverConfig.from_json(args.config) if args.config else SolverConfig()
    if args.seed is not None:
        config = SolverConfig(**{**config.to_dict(), "seed": args.seed})
    report = solve(f, f_tilde, config)
    return config, report


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    f = _load_density_2d(args.input_f)
    f_tilde = _load_density_2d(args.input_g)
    config, report = _solve_pair(f, f_tilde, args)

    p = report.p_star
    g = build_g_map(f, p)
    h = build_h_map(f_tilde, p)
    write_grid_csv(out_dir / "p_star.csv", p.density.grid_x, p.density.grid_y, p.values)
    write_grid_csv(out_dir / "g.csv", p.density.grid_x, p.density.grid_y, g)
    write_grid_csv(out_dir / "h.csv", p.density.grid_x, p.density.grid_y, h)

    f1, _ = marginals_2d(f)
    _, f2 = marginals_2d(f_tilde)
    independent = ipfp_project(np.outer(f1.values, f2.values), f1, f2)
    el_independent = euler_lagrange_residual(f, f_tilde, independent).interior_l2
    body = {
        "command": "solve",
        "version": __version__,
        "seed": config.seed,
        "config": config.to_dict(),
        "grid": _grid_spec(f),
        "L_final": report.L_final,
        "L_trace": [float(v) for v in report.L_trace],
        "grad_norm_trace": [float(v) for v in report.grad_norm_trace],
        "iterations": report.iterations,
        "termination_reason": report.termination_reason,
        "el_residual": {
            "interior_l2": report.el_residual_final,
            "independent_coupling_interior_l2": el_independent,
        },
        "marginal_error": {"max_iterate_l1": report.max_marginal_error},
        "per_axis_w2_sum": _per_axis_w2_sum(f, f_tilde),
        "multistart": {
            "finals": report.start_finals,
            "best_start": report.best_start,
            "within_tol_fraction": report.multistart_within_tol,
            "nonconvexity_flag": report.nonconvexity_flag,
        },
    }
    _write_report(out_dir, body, time.perf_counter() - t0)
    return 0 if report.termination_reason != "max_iters" else 2


def cmd_oracle(args) -> int:
    t0 = time.perf_counter()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.instance:
        with open(args.instance, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        instance = TransportInstance(
            np.asarray(doc["supply"], dtype=float),
            np.asarray(doc["demand"], dtype=float),
            np.asarray(doc["cost"], dtype=float),
        )
        plan = solve_lp(instance)
        np.savetxt(out_dir / "plan.csv", plan.flows, delimiter=",")
        body = {"command": "oracle", "mode": "lp", "objective": plan.objective}
    else:
        f = _load_density_2d(args.input_f)
        f_tilde = _load_density_2d(args.input_g)
        result = solve_full_2d(f, f_tilde)
        np.savetxt(out_dir / "plan.csv", result.plan.flows, delimiter=",")
        body = {
            "command": "oracle",
            "mode": "full_2d",
            "objective": result.objective,
            "grid": _grid_spec(f),
        }
    _write_report(out_dir, body, time.perf_counter() - t0)
    return 0


def cmd_check_el(args) -> int:
    t0 = time.perf_counter()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    f = _load_density_2d(args.input_f)
    f_tilde = _load_density_2d(args.input_g)
    f1, _ = marginals_2d(f)
    _, f2 = marginals_2d(f_tilde)
    if args.input_p:
        grid_x, grid_y, values = read_grid_csv(args.input_p)
        p = ipfp_project(values, f1, f2)
    else:
        p = ipfp_project(np.outer(f1.values, f2.values), f1, f2)
    el = euler_lagrange_residual(f, f_tilde, p)
    phi, psi = first_variation(f, f_tilde, p)
    write_grid_csv(out_dir / "residual.csv", p.density.grid_x, p.density.grid_y, el.residual)
    write_grid_csv(out_dir / "grad.csv", p.density.grid_x, p.density.grid_y, phi + psi)
    body = {
        "command": "check-el",
        "grid": _grid_spec(f),
        "interior_l2": el.interior_l2,
        "max_abs_residual": float(np.max(np.abs(el.residual))),
        "coupling": "file" if args.input_p else "independent",
    }
    _write_report(out_dir, body, time.perf_counter() - t0)
    return 0


_LEMMA_CASES = {
    "lemma1": [
        ("constant", lambda X, Y: np.ones_like(X), 0.3, 0.7, 1.0),
        ("linear_sum", lambda X, Y: X + Y, 0.0, 0.0, 0.0),
        ("sin_cos", lambda X, Y: np.sin(X) * np.cos(Y), 0.3, 0.7, float(np.sin(0.3) * np.cos(0.7))),
    ],
    "lemma2": [
        ("bilinear", lambda X, Y: X * Y, 0.25, 0.4, 1.0),
        ("square_product", lambda X, Y: X**2 * Y**2, 0.5, 0.5, 1.0),
        ("exponential", lambda X, Y: np.exp(X + 2 * Y), 0.2, 0.1, float(2 * np.exp(0.4))),
    ],
}


def cmd_check_lemmas(args) -> int:
    t0 = time.perf_counter()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = {"lemma1": [], "lemma2": []}
    for name, beta, a, b, expected in _LEMMA_CASES["lemma1"]:
        rep = lemma1_checker(beta, a, b)
        results["lemma1"].append(
            {
                "case": name,
                "expected": expected,
                "limit": rep.limit,
                "error": abs(rep.limit - expected),
                "observed_order": rep.observed_order,
            }
        )
    for name, beta, a, b, expected in _LEMMA_CASES["lemma2"]:
        rep = lemma2_checker(beta, a, b)
        results["lemma2"].append(
            {
                "case": name,
                "expected": expected,
                "limit": rep.limit,
                "error": abs(rep.limit - expected),
                "fd_reference": rep.reference,
                "observed_order": rep.observed_order,
            }
        )
    body = {"command": "check-lemmas", "results": results}
    _write_report(out_dir, body, time.perf_counter() - t0)
    return 0


def cmd_compare(args) -> int:
    t0 = time.perf_counter()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    f = _load_density_2d(args.input_f)
    f_tilde = _load_density_2d(args.input_g)
    oracle_result = solve_full_2d(f, f_tilde)  # size check runs before the solve
    config, report = _solve_pair(f, f_tilde, args)
    p = report.p_star
    g = build_g_map(f, p)
    h = build_h_map(f_tilde, p)
    cost = coupling_cost(f, f_tilde, p, g, h)
    gap = abs(cost.total - oracle_result.objective)
    tolerance = args.tolerance
    body = {
        "command": "compare",
        "seed": config.seed,
        "grid": _grid_spec(f),
        "L_p_star": cost.total,
        "oracle_optimum": oracle_result.objective,
        "gap": gap,
        "tolerance": tolerance,
        "within_tolerance": bool(gap <= tolerance),
        "el_residual_interior_l2": report.el_residual_final,
    }
    _write_report(out_dir, body, time.perf_counter() - t0)
    return 0 if gap <= tolerance else 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planar-mk",
        description="Optimal planar couplings by conditional-quantile reduction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p, need_g=True):
        p.add_argument("--input-f", required=True, help="source density file (.json or .csv)")
        p.add_argument("--input-g", required=need_g, help="target density file (.json or .csv)")
        p.add_argument("--out-dir", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed override (default 0 via config)")
        p.add_argument("--config", default=None, help="solver config JSON")

    p_solve = sub.add_parser("solve", help="minimize the reduced objective and export maps")
    add_io(p_solve)
    p_solve.set_defaults(fn=cmd_solve)

    p_oracle = sub.add_parser("oracle", help="exact LP optimum (instance file or density pair)")
    p_oracle.add_argument("--instance", default=None, help="JSON with supply/demand/cost")
    p_oracle.add_argument("--input-f", default=None)
    p_oracle.add_argument("--input-g", default=None)
    p_oracle.add_argument("--out-dir", default="out")
    p_oracle.set_defaults(fn=cmd_oracle)

    p_el = sub.add_parser("check-el", help="stationarity residual at a coupling")
    add_io(p_el)
    p_el.add_argument("--input-p", default=None, help="coupling grid CSV (default: independent)")
    p_el.set_defaults(fn=cmd_check_el)

    p_lem = sub.add_parser("check-lemmas", help="averaging-lemma convergence checks")
    p_lem.add_argument("--out-dir", default="out")
    p_lem.set_defaults(fn=cmd_check_lemmas)

    p_cmp = sub.add_parser("compare", help="solver optimum against the exact LP")
    add_io(p_cmp)
    p_cmp.add_argument("--tolerance", type=float, default=1e-3)
    p_cmp.set_defaults(fn=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "oracle" and not args.instance and not (args.input_f and args.input_g):
        parser.error("oracle needs --instance or both --input-f and --input-g")
    try:
        return args.fn(args)
    except SizeLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (
        DensityFormatError,
        UnbalancedInstanceError,
        MarginalMismatchError,
        FeasibilityError,
        NoDescentError,
        FileNotFoundError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
