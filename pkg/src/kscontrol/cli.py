"""Command-line front end: ``kscontrol <command> --config cfg.json --out dir``.

Exit codes: 0 success, 1 usage error, 2 invalid configuration or inputs,
3 solver or convergence failure.
"""

import argparse
import os
import sys
import warnings

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import audit, cole_hopf, hum, nonlinear, trajectory, weights
from .config import ConfigError, load_config, to_dict
from .errors import (ConstructionError, ConvergenceError, DimensionError, DivergenceError,
                     DomainError, HypothesisError, ParameterError, StabilityError)
from .io import dump_json, write_field_csv, write_table_csv
from .linear_pde import CoefficientSet, assemble_step_operators
from .mesh import gradient

COMMANDS = ("trajectory", "hum", "nonlinear", "cole-hopf",
            "audit-observability", "audit-carleman", "demo-neumann")
EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def build_weights(cfg, mesh):
    w = cfg.weights
    rho = weights.build_rho(mesh, tuple(w.omega0), w.max_exponent)
    if w.auto_sweep:
        return weights.select_weight_set(mesh, rho, w.m, w.k)
    R = w.rho_scale or weights.mid_horizon_scale(mesh, rho, w.s, w.lam, w.m, w.k)
    return weights.build_weight_set(mesh, rho, w.s, w.lam, w.m, w.k, R)


def build_trajectory(cfg, mesh):
    t = cfg.trajectory
    params = trajectory.TrajectoryParams(t.p_bar, t.w0.build(mesh), t.v0.build(mesh), t.smallness)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", trajectory.SmallDataWarning)
        traj = trajectory.solve_free_trajectory(params, mesh)
    return traj, [str(c.message) for c in caught]


def _cutoff(cfg, mesh):
    return weights.build_cutoff(mesh, tuple(cfg.weights.omega), tuple(cfg.weights.omega1))


def cmd_trajectory(cfg, mesh, out):
    traj, notes = build_trajectory(cfg, mesh)
    write_field_csv(os.path.join(out, "fields.csv"), mesh, u_bar=traj.u_bar, v_bar=traj.v_bar)
    write_table_csv(os.path.join(out, "energy.csv"), ["t", "E"], zip(mesh.t, traj.energy_series))
    return {**traj.summary(), "warnings": notes}


def cmd_hum(cfg, mesh, out):
    traj, notes = build_trajectory(cfg, mesh)
    ws = build_weights(cfg, mesh)
    c = cfg.control
    coeffs = CoefficientSet.from_trajectory(traj.u_bar, traj.v_bar, actuation=c.actuation)
    ops = assemble_step_operators(coeffs, _cutoff(cfg, mesh), mesh)
    problem = hum.PenalizedProblem(c.eps, ws, ops, c.y0.build(mesh), c.z0.build(mesh),
                                   cfg.weights.kernel_peak)
    eps_values = c.eps_sweep or [c.eps]
    sols, slope = hum.eps_sweep(problem, eps_values, c.cg_tol, c.max_iter)
    ratios = [s.cost_ratio for s in sols]
    last = sols[-1]
    write_field_csv(os.path.join(out, "control.csv"), mesh, h=last.h)
    weights.export_weights_csv(ws, os.path.join(out, "weights.csv"))
    return {
        "runs": [s.summary() for s in sols],
        "slope": slope,
        "cost_ratio_variation": max(ratios) / min(ratios) if min(ratios) > 0 else float("inf"),
        "initial_norm": last.initial_norm,
        "weight_underflow_count": ws.underflow_count,
        "warnings": notes,
    }


def cmd_nonlinear(cfg, mesh, out):
    traj, notes = build_trajectory(cfg, mesh)
    ws = build_weights(cfg, mesh)
    c, fp = cfg.control, cfg.fixed_point
    fcfg = nonlinear.FixedPointConfig(
        damping=fp.damping, max_iters=fp.max_iters, rel_tol=fp.rel_tol, eps=c.eps,
        smallness_bound=fp.smallness_bound, actuation=c.actuation,
        kernel_peak=cfg.weights.kernel_peak, cg_tol=c.cg_tol, cg_max_iter=c.max_iter,
    )
    res = nonlinear.fixed_point_control(c.y0.build(mesh), c.z0.build(mesh), traj, fcfg, ws,
                                        _cutoff(cfg, mesh))
    rows = [(k + 1, ch, tn) for k, (ch, tn) in enumerate(zip(res.history, res.inner_terminal_norms))]
    write_table_csv(os.path.join(out, "history.csv"), ["k", "rel_change", "inner_terminal_norm"], rows)
    write_field_csv(os.path.join(out, "control.csv"), mesh, h=res.h)
    return {**res.summary(), "warnings": notes}


def cmd_cole_hopf(cfg, mesh, out):
    traj, notes = build_trajectory(cfg, mesh)
    v0 = traj.v_bar[0]
    # c0 with (ln c0)_x = v0, normalized to c0(0) = 1
    c0 = np.exp(cumulative_trapezoid(v0, dx=mesh.dx, initial=0.0))
    chem = cole_hopf.reconstruct_chemical(traj.u_bar, traj.v_bar, c0, mesh)
    consistency = float(np.max(np.abs(gradient(np.log(chem.c), mesh) - traj.v_bar)))
    ph = cfg.physical
    params = cole_hopf.PhysicalParams(ph.D, ph.chi, ph.mu)
    phys_mesh, _ = cole_hopf.physical_scaling(params, "to_physical", mesh)
    write_field_csv(os.path.join(out, "chemical.csv"), mesh, c=chem.c)
    return {
        "min_c": float(chem.c.min()),
        "nonnegative": bool(np.all(chem.c >= 0)),
        "overflow_count": chem.overflow_count,
        "gradient_log_c_error": consistency,
        "physical_length": phys_mesh.length,
        "physical_horizon": phys_mesh.horizon,
        "curl_free": "automatic in one space dimension",
        "warnings": notes,
    }


def _audit_inputs(cfg, mesh):
    traj, _ = build_trajectory(cfg, mesh)
    ws = build_weights(cfg, mesh)
    coeffs = CoefficientSet.from_trajectory(traj.u_bar, traj.v_bar, actuation=cfg.control.actuation)
    return ws, coeffs


def _write_audit(report, out):
    write_table_csv(os.path.join(out, "samples.csv"), ["sample", "lhs", "rhs", "ratio"], report.rows())
    return report.summary()


def cmd_audit_observability(cfg, mesh, out):
    ws, coeffs = _audit_inputs(cfg, mesh)
    rep = audit.observability_ratio(cfg.audit.samples, ws, coeffs, mesh, cfg.seed,
                                    tuple(cfg.weights.omega))
    return _write_audit(rep, out)


def cmd_audit_carleman(cfg, mesh, out):
    ws, coeffs = _audit_inputs(cfg, mesh)
    rep = audit.carleman_ratio(cfg.audit.carleman_samples, ws, coeffs, mesh, cfg.seed,
                               tuple(cfg.weights.omega))
    return _write_audit(rep, out)


def cmd_demo_neumann(cfg, mesh, out):
    ws, coeffs = _audit_inputs(cfg, mesh)
    return audit.neumann_counterexample(mesh, ws, coeffs, tuple(cfg.weights.omega)).summary()


HANDLERS = {
    "trajectory": cmd_trajectory,
    "hum": cmd_hum,
    "nonlinear": cmd_nonlinear,
    "cole-hopf": cmd_cole_hopf,
    "audit-observability": cmd_audit_observability,
    "audit-carleman": cmd_audit_carleman,
    "demo-neumann": cmd_demo_neumann,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def make_parser():
    p = _Parser(prog="kscontrol", description="Null controls for a chemotaxis system.")
    p.add_argument("command", help="one of: " + ", ".join(COMMANDS))
    p.add_argument("--config", help="JSON configuration file (defaults when omitted)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="random seed (overrides the config)")
    return p


def run(command, config_path=None, out=None, seed=None):
    """Execute one command; returns the process exit code."""
    if command not in HANDLERS:
        print(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(config_path)
        if seed is not None:
            if seed < 0:
                raise ConfigError("seed", "must be nonnegative")
            cfg.seed = seed
        if out is not None:
            cfg.output = out
        mesh = cfg.mesh.build()
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(cfg.output, exist_ok=True)
    # the output location is not an input, so identical runs give identical summaries
    resolved = {k: v for k, v in to_dict(cfg).items() if k != "output"}
    summary = {"command": command, "config": resolved}
    try:
        summary["result"] = HANDLERS[command](cfg, mesh, cfg.output)
        summary["status"] = "ok"
        code = EXIT_OK
    except (ConstructionError, ParameterError, HypothesisError, DomainError, DimensionError,
            ValueError) as exc:
        summary.update(status="invalid", error=str(exc))
        code = EXIT_CONFIG
    except (ConvergenceError, DivergenceError, StabilityError) as exc:
        summary.update(status="solver_failure", error=str(exc))
        code = EXIT_SOLVER
    dump_json(summary, os.path.join(cfg.output, "summary.json"))
    if code:
        print(summary["error"], file=sys.stderr)
    return code


def main(argv=None):
    args = make_parser().parse_args(argv)
    return run(args.command, args.config, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
