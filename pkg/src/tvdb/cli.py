"""Command-line runner: ``tvdb {solve,mosco,compare,lattice,selftest}``."""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import io as tio
from . import scenarios
from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .energies import EnergyParams
from .flow import (ConvergenceError, EvolutionProblem, StepperConfig, check_weak_inequality,
                   run_flow)
from .grid import StateVector, random_state
from .mosco import (ResolutionError, mosco_m1_probe, mosco_m2_sweep, select_level,
                    trajectory_convergence)
from .props import comparison_check, lattice_inequality_check, t_monotonicity_check

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_PROPERTY = 0, 1, 2, 3


def _stepper(cfg: ExperimentConfig) -> StepperConfig:
    return StepperConfig(inner_tol=cfg["flow.inner_tol"], inner_max_iters=cfg["flow.inner_max_iters"])


def _single(cfg: ExperimentConfig, rng) -> tuple[StateVector, StateVector | None]:
    name = cfg["scenario.name"]
    if name in scenarios.SINGLE:
        return scenarios.single(name, cfg.grid, rng, cfg["scenario.amplitude"]), None
    u1, th1, _, _ = scenarios.paired(name, cfg.grid, rng, cfg["scenario.amplitude"],
                                     cfg["scenario.shift"])
    return u1, th1


def _problem(cfg: ExperimentConfig, params: EnergyParams, u0: StateVector, theta):
    return EvolutionProblem(params, u0, scenarios.constant_source(theta), cfg["flow.T"],
                            cfg["flow.tau"])


class _Run:
    """Output directory, timing and manifest bookkeeping for one command."""

    def __init__(self, command: str, cfg: ExperimentConfig):
        self.command, self.cfg = command, cfg
        self.out = Path(cfg["output.directory"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.t0 = time.perf_counter()
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def csv(self, name, header, rows, x_col=None, y_cols=(), logscale=False):
        if not self.cfg["output.csv"]:
            return
        tio.write_csv(self.path(name), header, rows)
        if x_col is not None:
            gp = name.rsplit(".", 1)[0] + ".gp"
            tio.write_gnuplot(self.path(gp), name, x_col, y_cols, header, logscale)

    def finish(self, status: int, **extra) -> int:
        tio.write_manifest(self.out / "manifest.json", self.cfg.echo(), __version__,
                           time.perf_counter() - self.t0, command=self.command,
                           exit_status=status, files=sorted(set(self.files)), **extra)
        return status


def cmd_solve(cfg: ExperimentConfig) -> int:
    run = _Run("solve", cfg)
    rng = np.random.default_rng(cfg["seed"])
    params = cfg.params
    u0, theta = _single(cfg, rng)
    notes = []
    if not params.singular and not u0.is_trace_constrained():
        u0 = u0.with_traces_as_boundary()
        notes.append("initial boundary fields replaced by the bulk traces for the relaxed flow")
    stride = cfg["output.checkpoint_stride"]

    def checkpoint(m, U, traj):
        if m % stride == 0 or m == problem.n_steps:
            tio.write_state(run.path(f"state_m{m:06d}.tvdb"), U)

    problem = _problem(cfg, params, u0, theta)
    tio.write_state(run.path("state_m000000.tvdb"), u0)
    try:
        traj = run_flow(problem, _stepper(cfg), callback=checkpoint)
    except ConvergenceError as exc:
        print(f"solver failure at step {exc.step}: {exc}", file=sys.stderr)
        return run.finish(EXIT_SOLVER, failed_step=exc.step, residual=exc.residual)
    run.csv("energy.csv", tio.ENERGY_HEADER, tio.energy_rows(traj), "t", ("total",))
    e = traj.total_energy()
    print(f"solve: {problem.n_steps} steps, energy {e[0]:.6g} -> {e[-1]:.6g}, "
          f"max inner residual {max(traj.residuals):.3e}")
    status, extra = EXIT_OK, {"notes": notes}
    if params.singular and cfg["output.weak_tests"] > 0:
        tests = [random_state(cfg.grid, rng) for _ in range(cfg["output.weak_tests"])]
        rep = check_weak_inequality(params, traj, tests, tol=max(1e-6, 100 * cfg["flow.inner_tol"]))
        rows = ((m + 1, float(rep.slacks[m].min())) for m in range(rep.slacks.shape[0]))
        run.csv("weak_inequality.csv", ("m", "worst_slack"), rows)
        print(f"weak inequality: worst slack {rep.worst_slack:.3e} "
              f"({'ok' if rep.passed else 'VIOLATED'})")
        extra["weak_inequality_worst_slack"] = rep.worst_slack
        if not rep.passed:
            status = EXIT_PROPERTY
    return run.finish(status, **extra)


def _energy_integral(traj) -> float:
    return float(traj.tau * sum(b.total for b in traj.energies[1:]))


def cmd_mosco(cfg: ExperimentConfig) -> int:
    run = _Run("mosco", cfg)
    rng = np.random.default_rng(cfg["seed"])
    schedule = cfg.schedule
    base = cfg.params
    base_singular = base.as_singular()
    target, theta = _single(cfg, rng)
    mode = cfg["mosco.mode"]
    header = ("n", "delta", "kappa", "level", "phi_n", "phi_star", "gap", "sup_traj_dist")
    max_level = cfg["schedule.max_level"]
    try:
        if mode == "m2":
            rep = mosco_m2_sweep(base_singular if base.singular else base, schedule, target, max_level)
            run.csv("mosco.csv", header, rep.rows(), "n", ("gap",), logscale=False)
            print(f"mosco m2: gaps {', '.join(f'{g:.3e}' for g in rep.gaps)}; "
                  f"monotone from n = {rep.monotone_from}")
            ok = rep.bounds_hold
        elif mode == "m1":
            levels = {}

            def builder(n):
                rc = select_level(target, schedule.kappas[n - 1], max_level)
                levels[n] = rc.level
                return rc.state

            rep = mosco_m1_probe(base, schedule, target, builder)
            rows = ((n, schedule.deltas[n - 1], schedule.kappas[n - 1], levels[n], rep.phi_n[n - 1],
                     rep.phi_star_target, abs(rep.phi_n[n - 1] - rep.phi_star_target), "")
                    for n in range(1, len(schedule) + 1))
            run.csv("mosco.csv", header, rows, "n", ("phi_n", "phi_star"))
            print(f"mosco m1: lower bound {'holds' if rep.holds else 'VIOLATED'}; "
                  f"liminf excess {rep.liminf_excess:.3e}")
            ok = rep.holds
        else:
            problem = _problem(cfg, base_singular, target.with_traces_as_boundary(), theta)
            kind = base.regularizer.kind if base.regularizer else "huber"
            rep = trajectory_convergence(problem, schedule, _stepper(cfg), max_level, kind)
            e_star = _energy_integral(rep.singular)
            rows = [(n, schedule.deltas[n - 1], schedule.kappas[n - 1], rep.levels[n - 1],
                     _energy_integral(rep.relaxed[n - 1]), e_star,
                     rep.energy_integral_gaps[n - 1], rep.sup_distances[n - 1])
                    for n in range(1, len(schedule) + 1)]
            run.csv("mosco.csv", header, rows, "n", ("gap", "sup_traj_dist"))
            print("mosco trajectory: sup distances "
                  + ", ".join(f"{d:.3e}" for d in rep.sup_distances))
            ok = True
    except ResolutionError as exc:
        print(f"grid.ny: {exc}", file=sys.stderr)
        return run.finish(EXIT_CONFIG)
    except ConvergenceError as exc:
        print(f"solver failure at step {exc.step}: {exc}", file=sys.stderr)
        return run.finish(EXIT_SOLVER)
    return run.finish(EXIT_OK if ok else EXIT_PROPERTY, mode=mode)


def cmd_compare(cfg: ExperimentConfig) -> int:
    name = cfg["scenario.name"]
    if name not in scenarios.PAIRED:
        raise cfg.error("scenario.name", f"compare needs a paired scenario {scenarios.PAIRED}")
    run = _Run("compare", cfg)
    rng = np.random.default_rng(cfg["seed"])
    u1, th1, u2, th2 = scenarios.paired(name, cfg.grid, rng, cfg["scenario.amplitude"],
                                        cfg["scenario.shift"])
    params = cfg.params
    if not params.singular:
        u1, u2 = u1.with_traces_as_boundary(), u2.with_traces_as_boundary()
    try:
        rep = comparison_check(_problem(cfg, params, u1, th1), _problem(cfg, params, u2, th2),
                               _stepper(cfg))
    except ConvergenceError as exc:
        print(f"solver failure at step {exc.step}: {exc}", file=sys.stderr)
        return run.finish(EXIT_SOLVER)
    run.csv("compare.csv", rep.CSV_HEADER, rep.rows(), "t", ("lhs", "rhs"))
    print(f"compare: worst violation {rep.worst_violation:.3e}, "
          f"max positive part {rep.max_positive_part.max():.3e}, ordered data {rep.ordered_data}")
    return run.finish(EXIT_OK if rep.passed else EXIT_PROPERTY,
                      worst_violation=rep.worst_violation)


def cmd_lattice(cfg: ExperimentConfig) -> int:
    run = _Run("lattice", cfg)
    params = cfg.params
    star = params.as_singular()
    reg = params.regularizer
    relaxed = params if reg else star.relaxed(0.1, max(params.kappa, 0.1))
    seed = cfg["seed"]
    rows, status = [], EXIT_OK
    for label, p in (("phi_star", star), ("phi_delta_kappa", relaxed)):
        rep = lattice_inequality_check(p, cfg["props.lattice_samples"], seed, cfg.grid)
        rows.append((label, "submodularity_gap", len(rep.gaps), rep.min_gap, rep.asserted, rep.passed))
        if not rep.asserted:
            print(f"warning: {p.tv_mode} mode, {label}: min gap {rep.min_gap:.3e} (reported, not asserted)")
        elif not rep.passed:
            status = EXIT_PROPERTY
    if cfg["props.prox_samples"] > 0:
        rep = t_monotonicity_check(star, cfg["props.prox_samples"], seed)
        asserted = star.tv_mode == "anisotropic"
        rows.append(("phi_star", "t_monotonicity", len(rep.values), rep.min_value, asserted,
                     rep.passed or not asserted))
        if not asserted:
            print(f"warning: {star.tv_mode} mode: min T-monotonicity value {rep.min_value:.3e} "
                  "(reported, not asserted)")
        elif not rep.passed:
            status = EXIT_PROPERTY
    run.csv("lattice.csv", ("energy", "check", "samples", "min_value", "asserted", "passed"), rows)
    for r in rows:
        print(f"lattice {r[0]} {r[1]}: min {r[3]:.3e} over {r[2]} samples")
    return run.finish(status)


def cmd_selftest(cfg: ExperimentConfig) -> int:
    """Fast sanity checks of the core identities; exit 3 if any fails."""
    from .flow import prox_step
    from .grid import GridSpec, inner_product_H, forward_gradient, forward_gradient_adjoint

    run = _Run("selftest", cfg)
    rng = np.random.default_rng(cfg["seed"])
    g = GridSpec(8, 6)
    checks = []
    a, b = random_state(g, rng), random_state(g, rng)
    checks.append(("inner product symmetric",
                   abs(inner_product_H(a, b) - inner_product_H(b, a)) <= 1e-12))
    w, p = rng.standard_normal(g.bulk_shape), rng.standard_normal((2, g.nx, g.ny))
    lhs = float((forward_gradient(w, g) * p).sum())
    rhs = float((w * forward_gradient_adjoint(p, g)).sum())
    checks.append(("gradient adjoint", abs(lhs - rhs) <= 1e-9 * (1 + abs(lhs))))
    P = EnergyParams(1.0)
    W, info = prox_step(P, StepperConfig(), a, 1e-2)
    W2, _ = prox_step(P, StepperConfig(), a + 0.5, 1e-2)
    checks.append(("prox translation equivariance", (W2 - W - 0.5).max_abs() <= 1e-6))
    lat = lattice_inequality_check(P, 50, cfg["seed"], g)
    checks.append(("lattice inequality", lat.passed))
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    ok = all(ok for _, ok in checks)
    return run.finish(EXIT_OK if ok else EXIT_PROPERTY)


COMMANDS = {"solve": cmd_solve, "mosco": cmd_mosco, "compare": cmd_compare,
            "lattice": cmd_lattice, "selftest": cmd_selftest}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tvdb", description=__doc__)
    ap.add_argument("--version", action="version", version=f"tvdb {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or "").strip().splitlines()[0] if fn.__doc__ else None)
        sp.add_argument("--config", type=Path, help="flat key = value config file")
        sp.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
        sp.add_argument("--seed", type=int, help="random seed (overrides seed)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.out is not None:
        overrides["output.directory"] = str(args.out)
    if args.seed is not None:
        overrides["seed"] = args.seed
    try:
        cfg = (load_config(args.config, overrides) if args.config
               else parse_config("", "<defaults>", overrides))
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # parameter combinations rejected by the numerical modules
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
