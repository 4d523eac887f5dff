"""Batch front-end: gsblow <command> --config <path> [--out <dir>] [--threads <k>].

Commands: eigen, scalar, system, sweep, hypotheses. Each run writes CSV
data, a key-value report, rendered figures, and a gnuplot script next to
the CSV. Exit codes: 0 success, 1 solver error, 2 hypothesis-check
failure (informative), 64 unparseable configuration. The environment
variable GSBLOW_OUT overrides --out.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import plots, reporting
from .config import ConfigError, RunConfig, load_config
from .grid_potential import build_grid, check_class_P, check_sandwich
from .operators import assemble, dump_triplets
from .scalar_solver import (SCALAR_SWEEP_COLUMNS, DeflationError, PoleError,
                            SolveError, certify, estimate_delta, solve_scalar,
                            sweep_scalar, collar_ratio_stats)
from .spectrum import NonConvergenceError, SpectrumError, ground_state
from .system_solver import (SYSTEM_SWEEP_COLUMNS, CouplingMatrix,
                            DegenerateMatrixError, SweepAborted, SystemProblem,
                            analyze, blowup_sweep, check_theorem_conditions,
                            make_schedule, solve_system)

SOLVER_ERRORS = (PoleError, DeflationError, SolveError, SpectrumError,
                 NonConvergenceError, DegenerateMatrixError, SweepAborted,
                 ValueError)


def _out_dir(cfg: RunConfig, cli_out: str | None) -> Path:
    env = os.environ.get("GSBLOW_OUT")
    chosen = env or cli_out or cfg.output.directory or "."
    path = Path(chosen)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _prepare(cfg: RunConfig):
    grid = build_grid(cfg.grid.geometry, cfg.grid.r_max, cfg.grid.n,
                      dim=cfg.grid.dim)
    op = assemble(grid, cfg.potential)
    gs = ground_state(op, tol=cfg.tolerances.eigen_tol)
    return grid, op, gs


def _eigen_rows(grid, gs):
    return [(i, grid.nodes[i, 0], gs.phi[i]) for i in range(grid.total)] \
        if grid.nodes.shape[1] == 1 else \
        [(i, grid.nodes[i, 0], grid.nodes[i, 1], gs.phi[i])
         for i in range(grid.total)]


def run_eigen(cfg: RunConfig, out: Path, threads: int) -> int:
    grid, op, gs = _prepare(cfg)
    prefix = cfg.output.prefix
    header = ("node", "r_or_x", "phi") if grid.nodes.shape[1] == 1 \
        else ("node", "x1", "x2", "phi")
    csv_path = out / f"{prefix}_eigen.csv"
    reporting.write_csv(csv_path, header, _eigen_rows(grid, gs))
    reporting.write_report(out / f"{prefix}_report.txt", [
        ("command", "eigen"),
        ("lambda1", gs.lambda1),
        ("lambda2", gs.lambda2),
        ("residual", gs.residual),
        ("n", grid.n),
        ("r_max", grid.r_max),
        ("geometry", f"{grid.geometry}({grid.dim})"),
        ("potential", cfg.potential.describe()),
    ])
    if cfg.output.dump_operator:
        dump_triplets(op, out / f"{prefix}_operator.mtx")
    if cfg.output.gnuplot:
        reporting.write_gnuplot(out / f"{prefix}_plot.gp", csv_path.name,
                                "eigen", "ground state")
    if cfg.output.plots:
        plots.render_eigen(grid, gs, out / f"{prefix}_eigen.png")
    return 0


def run_scalar(cfg: RunConfig, out: Path, threads: int) -> int:
    grid, op, gs = _prepare(cfg)
    prefix = cfg.output.prefix
    f = cfg.source.build(grid, gs)
    params = cfg.parameters
    report_lines = [("command", "scalar"), ("lambda1", gs.lambda1),
                    ("lambda2", gs.lambda2)]

    if params.sigma is not None or params.sigma_offset is not None:
        sigma = params.sigma if params.sigma is not None \
            else gs.lambda1 + params.sigma_offset
        sol = solve_scalar(op, gs, sigma, f, tol=cfg.tolerances.solve_tol)
        r_min, r_max, _, _, _ = collar_ratio_stats(sol.u, gs)
        rows = [(sigma, gs.lambda1 - sigma, sol.u1, sol.x_norm_u, r_min,
                 -r_max, sol.residual)]
        reporting.write_csv(out / f"{prefix}_scalar.csv",
                            SCALAR_SWEEP_COLUMNS, rows)
        report_lines.append(("sigma", sigma))
        for cert in certify(sol, gs, sigma, f):
            report_lines.append((f"certificate_{cert.kind}_holds", cert.holds))
            for key, value in cert.constants.items():
                report_lines.append((f"certificate_{cert.kind}_{key}", value))
        if cfg.output.plots and grid.nodes.shape[1] == 1:
            plots.render_scalar_solution(grid, gs, sol,
                                         out / f"{prefix}_scalar.png")
    else:
        offsets = np.geomspace(params.offset_start, params.offset_stop,
                               params.points)
        result = sweep_scalar(op, gs, f, offsets, side=params.side,
                              tol=cfg.tolerances.solve_tol)
        csv_path = out / f"{prefix}_scalar.csv"
        reporting.write_csv(csv_path, SCALAR_SWEEP_COLUMNS, result.csv_rows())
        report_lines += [("side", params.side), ("fitted_slope", result.slope),
                         ("gamma", result.gamma), ("k_prime", result.k_prime)]
        if cfg.output.gnuplot:
            reporting.write_gnuplot(out / f"{prefix}_plot.gp", csv_path.name,
                                    "scalar_sweep", "scalar sweep")
        if cfg.output.plots:
            plots.render_scalar_sweep(result, out / f"{prefix}_scalar.png")

    if params.estimate_delta:
        est = estimate_delta(op, gs, f)
        report_lines += [("delta_estimate", est.delta),
                         ("delta_failing_sigma",
                          est.failing_sigma if est.failing_sigma is not None
                          else "none")]
        if est.note:
            report_lines.append(("delta_note", est.note))
    reporting.write_report(out / f"{prefix}_report.txt", report_lines)
    return 0


def _system_context(cfg: RunConfig, grid, gs):
    ma = analyze(CouplingMatrix(*cfg.matrix))
    f1 = cfg.source_f1.build(grid, gs)
    f2 = cfg.source_f2.build(grid, gs)
    return ma, f1, f2


def run_system(cfg: RunConfig, out: Path, threads: int) -> int:
    grid, op, gs = _prepare(cfg)
    prefix = cfg.output.prefix
    ma, f1, f2 = _system_context(cfg, grid, gs)
    nu = gs.lambda1 - ma.xi1
    params = cfg.parameters
    mu = params.mu if params.mu is not None else nu + (params.mu_offset or 0.0)
    prob = SystemProblem.build(gs, mu, f1, f2)
    sol = solve_system(op, gs, ma, prob, tol=cfg.tolerances.solve_tol)
    cond = check_theorem_conditions(ma, prob, gs)

    header = ("node", "r_or_x", "phi", "u1", "u2")
    rows = [(i, grid.nodes[i, 0], gs.phi[i], sol.u1[i], sol.u2[i])
            for i in range(grid.total)]
    csv_path = out / f"{prefix}_system.csv"
    reporting.write_csv(csv_path, header, rows)
    reporting.write_report(out / f"{prefix}_report.txt", [
        ("command", "system"),
        ("lambda1", gs.lambda1), ("nu", nu), ("mu", mu),
        ("xi1", ma.xi1), ("xi2", ma.xi2), ("case", ma.case),
        ("cooperative", ma.cooperative),
        ("theorem", cond.branch), ("condition_value", cond.condition_value),
        ("residual1", sol.residual1), ("residual2", sol.residual2),
        ("u1_ratio_min", sol.stats1.ratio_min),
        ("u1_ratio_max", sol.stats1.ratio_max),
        ("u2_ratio_min", sol.stats2.ratio_min),
        ("u2_ratio_max", sol.stats2.ratio_max),
    ])
    if cfg.output.gnuplot:
        reporting.write_gnuplot(out / f"{prefix}_plot.gp", csv_path.name,
                                "system", "system solution")
    if cfg.output.plots:
        plots.render_system_solution(grid, gs, sol, out / f"{prefix}_system.png")
    return 0


def run_sweep(cfg: RunConfig, out: Path, threads: int) -> int:
    grid, op, gs = _prepare(cfg)
    prefix = cfg.output.prefix
    ma, f1, f2 = _system_context(cfg, grid, gs)
    nu = gs.lambda1 - ma.xi1
    params = cfg.parameters
    schedule = make_schedule(nu, side=params.side, start=params.offset_start,
                             stop=params.offset_stop, count=params.points)
    probe = SystemProblem.build(gs, schedule[0], f1, f2)
    cond = check_theorem_conditions(ma, probe, gs)
    result = blowup_sweep(op, gs, ma, (f1, f2), schedule,
                          tol=cfg.tolerances.solve_tol, threads=threads)

    csv_path = out / f"{prefix}_sweep.csv"
    reporting.write_csv(csv_path, SYSTEM_SWEEP_COLUMNS,
                        [r.csv_row() for r in result.records])
    predicted = cond.predicted_below if params.side == "below" \
        else cond.predicted_above
    pred_str = "".join("+" if s > 0 else "-" if s < 0 else "0"
                       for s in predicted)
    reporting.write_report(out / f"{prefix}_report.txt", [
        ("command", "sweep"),
        ("lambda1", gs.lambda1), ("nu", nu), ("side", params.side),
        ("case", ma.case), ("theorem", cond.branch),
        ("condition_value", cond.condition_value),
        ("f1_projection", cond.f1_1), ("f2_projection", cond.f2_1),
        ("fitted_slope_u1", result.fitted_slope[0]),
        ("fitted_slope_u2", result.fitted_slope[1]),
        ("gamma_u1", result.gamma_est[0]),
        ("gamma_u2", result.gamma_est[1]),
        ("sign_pattern_observed", result.sign_pattern),
        ("sign_pattern_predicted", pred_str),
        ("pattern_match", result.sign_pattern == pred_str),
    ])
    if cfg.output.gnuplot:
        reporting.write_gnuplot(out / f"{prefix}_plot.gp", csv_path.name,
                                "system_sweep", "blow-up sweep")
    if cfg.output.plots:
        plots.render_system_sweep(result, out / f"{prefix}_sweep.png")
    return 0


def run_hypotheses(cfg: RunConfig, out: Path, threads: int) -> int:
    grid = build_grid(cfg.grid.geometry, cfg.grid.r_max, cfg.grid.n,
                      dim=cfg.grid.dim)
    prefix = cfg.output.prefix
    r0 = cfg.parameters.r0
    lines = [("command", "hypotheses"), ("potential", cfg.potential.describe()),
             ("R0", r0)]
    failed = False

    sandwich_rep = None
    if cfg.potential.radial:
        rep = check_class_P(cfg.potential, grid, r0)
        lines += [
            f"class P membership: {'true' if rep.member else 'false'}",
            ("monotone_ok", rep.monotone_ok),
            ("tail_exponent", rep.tail_exponent),
            ("asymptotic_exponent", rep.asymptotic_exponent),
            ("superlinear", rep.superlinear),
            ("tail_integral", rep.tail_integral),
        ]
        failed = failed or not rep.member
    else:
        rep = None
        lines.append("class P membership: skipped (potential is not radial)")

    if cfg.sandwich is not None:
        q1, q2 = cfg.sandwich
        sandwich_rep = check_sandwich(cfg.potential, q1, q2, grid, r0)
        lines += [
            f"sandwich holds: {'true' if sandwich_rep.holds else 'false'}",
            ("C0", sandwich_rep.C0),
            ("pointwise_ok", sandwich_rep.pointwise_ok),
            ("perturbation_integral", sandwich_rep.perturbation_integral),
            ("integral_finite", sandwich_rep.integral_finite),
            ("q1_member", sandwich_rep.q1_member),
            ("q2_member", sandwich_rep.q2_member),
        ]
        if sandwich_rep.violation_node is not None:
            lines.append(("violation_node", sandwich_rep.violation_node))
        failed = failed or not sandwich_rep.holds

    reporting.write_report(out / f"{prefix}_report.txt", lines)
    if cfg.output.plots and (rep is not None or sandwich_rep is not None):
        base = rep if rep is not None else check_class_P(
            cfg.sandwich[0], grid, r0)
        plots.render_hypotheses(grid, cfg.potential, base,
                                out / f"{prefix}_hypotheses.png",
                                sandwich=sandwich_rep)
    return 2 if failed else 0


COMMANDS = {
    "eigen": run_eigen,
    "scalar": run_scalar,
    "system": run_system,
    "sweep": run_sweep,
    "hypotheses": run_hypotheses,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gsblow",
        description="ground-state positivity and blow-up experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--threads", type=int, default=1)
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 64

    out = _out_dir(cfg, args.out)
    try:
        return COMMANDS[args.command](cfg, out, max(1, args.threads))
    except SOLVER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
