"""Acceptance criteria at their stated tolerances and runtime budgets.

Each test records one PASS/FAIL line in ``conftest.ACCEPTANCE_LINES`` before
asserting, so the terminal summary lists every criterion even when some fail.
"""
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from tvdb.energies import EnergyParams, eval_phi_star, total_variation
from tvdb.flow import EvolutionProblem, StepperConfig, check_weak_inequality, prox_step, run_flow
from tvdb.grid import GridSpec, StateVector, norm_H, random_state
from tvdb.mosco import (SweepSchedule, boundary_layer_extension, lifting_construct,
                        mosco_m2_sweep, trajectory_convergence)
from tvdb.props import comparison_check, lattice_inequality_check, t_monotonicity_check
from tvdb.regularizers import uniform_gap
from tvdb import scenarios

STAR = EnergyParams(epsilon=1.0)


def record(label, checks, detail):
    """Append the summary line and return the overall verdict."""
    ok = all(bool(c) for c in checks.values())
    failed = [k for k, c in checks.items() if not c]
    if failed:
        detail += "; failed: " + ", ".join(failed)
    ACCEPTANCE_LINES.append((label, ok, detail))
    return ok, failed


def finish(label, checks, detail):
    ok, failed = record(label, checks, detail)
    assert ok, f"{label}: {failed} ({detail})"


@pytest.fixture(scope="module")
def dissipation_run():
    g = GridSpec(32, 24)
    prob = EvolutionProblem(STAR, scenarios.step_profile(g), None, 0.1, 1e-3)
    t0 = time.perf_counter()
    traj = run_flow(prob, StepperConfig(inner_tol=1e-8))
    return traj, time.perf_counter() - t0


def test_c1_layer_extension_identity():
    t0 = time.perf_counter()
    g = GridSpec(64, 256)
    r = 32 * g.dy
    worst_l2, worst_tv = 0.0, 0.0
    for v in (np.ones(g.nx), np.sin(2 * np.pi * g.x)):
        b = boundary_layer_extension(v, r, g)
        l2 = float(np.sum(g.bulk_weights() * b * b))
        target = r / 3 * g.dx * float(v @ v)
        worst_l2 = max(worst_l2, abs(l2 / target - 1))
        bound = r / 2 * np.abs(np.roll(v, -1) - v).sum() + g.dx * np.abs(v).sum()
        worst_tv = max(worst_tv, total_variation(b, g) / bound - 1)
    dt = time.perf_counter() - t0
    finish("C1 layer extension", {"l2": worst_l2 <= 0.02, "tv": worst_tv <= 0.02, "time": dt < 1.0},
           f"L2 rel err {worst_l2:.2e}, TV overshoot {worst_tv:.2e}, {dt:.2f}s")


def random_boundary_field(g, rng):
    # two low Fourier modes plus a mean, scaled to an L2 norm in [0.05, 0.2]
    k = np.arange(1, 3)
    a, b = rng.standard_normal(2), rng.standard_normal(2)
    v = sum(a[i] * np.cos(2 * np.pi * k[i] * g.x) + b[i] * np.sin(2 * np.pi * k[i] * g.x)
            for i in range(2)) + rng.standard_normal()
    return v * rng.uniform(0.05, 0.2) / np.sqrt(g.dx * v @ v)


def test_c2_lifting_bounds():
    t0 = time.perf_counter()
    g = GridSpec(64, 512)
    rng = np.random.default_rng(7)
    worst_l2, worst_tv = 0.0, 0.0
    for _ in range(20):
        vb, vt = random_boundary_field(g, rng), random_boundary_field(g, rng)
        l1 = g.dx * (np.abs(vb).sum() + np.abs(vt).sum())
        for level in range(2, 7):
            f = lifting_construct(vb, vt, level, g)
            l2 = np.sqrt(np.sum(g.bulk_weights() * f * f))
            worst_l2 = max(worst_l2, l2 / (2.0 ** -level * 1.05))
            worst_tv = max(worst_tv, total_variation(f, g) / ((l1 + 2.0 ** -level) * 1.05))
    dt = time.perf_counter() - t0
    finish("C2 lifting bounds", {"l2": worst_l2 <= 1, "tv": worst_tv <= 1, "time": dt < 5.0},
           f"worst L2 ratio {worst_l2:.3f}, worst TV ratio {worst_tv:.3f}, {dt:.2f}s")


def test_c3_prox_oracle(prox_golden):
    t0 = time.perf_counter()
    nx, ny, lx, ly = prox_golden["grid"]
    g = GridSpec(nx, ny, lx, ly)
    dists, sub = [], []
    for inst in prox_golden["instances"]:
        Z = StateVector.from_flat(g, np.array(inst["z"]))
        ref = StateVector.from_flat(g, np.array(inst["w"]))
        W, _ = prox_step(STAR, StepperConfig(), Z, inst["tau"])
        dists.append(norm_H(W - ref))
        sub.append(norm_H(W - StateVector.from_flat(g, np.array(inst["subgradient_w"]))))
    dt = time.perf_counter() - t0
    finish("C3 prox oracle", {"match": max(dists) <= 1e-6, "time": dt < 10.0},
           f"H distances to conic reference {', '.join(f'{d:.1e}' for d in dists)}; "
           f"to 1e6-step subgradient run {', '.join(f'{d:.1e}' for d in sub)}; {dt:.2f}s")


def test_c4_dissipation(dissipation_run):
    traj, dt = dissipation_run
    dE = np.diff(traj.total_energy())
    finish("C4 dissipation", {"monotone": dE.max() <= 1e-8, "time": dt < 60.0},
           f"max energy increase {dE.max():.2e} over {len(dE)} steps, {dt:.1f}s")


def test_c5_comparison():
    t0 = time.perf_counter()
    g = GridSpec(16, 12)
    details, checks = [], {}
    for name in ("uniform_shift", "random_ordered"):
        u1, t1, u2, t2 = scenarios.paired(name, g, np.random.default_rng(3))
        p1 = EvolutionProblem(STAR, u1, scenarios.constant_source(t1), 0.05, 1e-3)
        p2 = EvolutionProblem(STAR, u2, scenarios.constant_source(t2), 0.05, 1e-3)
        rep = comparison_check(p1, p2)
        mpp = float(rep.max_positive_part.max())
        viol = float(np.max(rep.lhs - rep.rhs))
        checks[f"{name} ordered data"] = rep.ordered_data
        checks[f"{name} order"] = mpp <= 1e-6
        checks[f"{name} inequality"] = viol <= 1e-6
        details.append(f"{name}: max [U1-U2]+ {mpp:.1e}, max lhs-rhs {viol:.1e}")
    dt = time.perf_counter() - t0
    checks["time"] = dt < 60.0
    finish("C5 comparison", checks, "; ".join(details) + f"; {dt:.1f}s")


def test_c6_lattice_and_t_monotonicity():
    t0 = time.perf_counter()
    lat_star = lattice_inequality_check(STAR, 1000, 0)
    lat_rel = lattice_inequality_check(STAR.relaxed(0.1, 0.3), 1000, 1)
    mono = t_monotonicity_check(STAR, 200, 0)
    dt = time.perf_counter() - t0
    finish("C6 lattice and T-monotonicity",
           {"lattice star": lat_star.min_gap >= -1e-10, "lattice relaxed": lat_rel.min_gap >= -1e-10,
            "T-monotonicity": mono.min_value >= -1e-8, "time": dt < 30.0},
           f"min gaps {lat_star.min_gap:.2e} / {lat_rel.min_gap:.2e}, "
           f"min T-monotonicity value {mono.min_value:.2e}, {dt:.1f}s")


def test_c7_m2_sweep():
    t0 = time.perf_counter()
    g = GridSpec(64, 64)
    target = scenarios.boundary_jump(g)
    sched = SweepSchedule.geometric(8)
    rep = mosco_m2_sweep(STAR, sched, target)
    dt = time.perf_counter() - t0
    gaps = rep.gaps
    decreasing = all(a > b for a, b in zip(gaps[2:], gaps[3:]))
    phi_star = eval_phi_star(STAR, target).total
    bound = (g.lx * g.ly * uniform_gap(sched.params(STAR, 8).regularizer)
             + 2.0 ** -rep.levels[-1] + 0.1 * phi_star)
    finish("C7 recovery sweep", {"decreasing from n=3": decreasing, "final bound": gaps[-1] <= bound,
                                 "time": dt < 30.0},
           f"gaps {', '.join(f'{v:.2e}' for v in gaps)}; gap_8 {gaps[-1]:.2e} <= {bound:.2e}; "
           f"levels {rep.levels}; {dt:.1f}s")


def test_c8_trajectory_convergence():
    t0 = time.perf_counter()
    g = GridSpec(32, 24)
    prob = EvolutionProblem(STAR, scenarios.step_profile(g), None, 0.05, 1e-3)
    rep = trajectory_convergence(prob, SweepSchedule.geometric(6))
    dt = time.perf_counter() - t0
    d = rep.sup_distances
    finish("C8 trajectory convergence",
           {"halved": d[5] <= 0.5 * d[1], "energy gaps decreasing from n=3": rep.tail_decreasing(3),
            "time": dt < 300.0},
           f"sup distances {', '.join(f'{v:.3e}' for v in d)}; energy-integral gaps "
           f"{', '.join(f'{v:.2e}' for v in rep.energy_integral_gaps)}; {dt:.1f}s")


def test_c9_weak_inequality(dissipation_run):
    traj, _ = dissipation_run
    g = traj.states[0].grid
    rng = np.random.default_rng(9)
    # half generic states, half states close to the trajectory where the inequality is tight
    tests = [random_state(g, rng) for _ in range(25)]
    picks = rng.integers(0, len(traj.states), 25)
    tests += [traj.states[k] + random_state(g, rng, scale=1e-6) for k in picks]
    t0 = time.perf_counter()
    rep = check_weak_inequality(STAR, traj, tests, tol=np.inf)
    dt = time.perf_counter() - t0
    finish("C9 weak inequality", {"slack": rep.worst_slack >= -1e-6, "time": dt < 30.0},
           f"worst slack {rep.worst_slack:.2e} at step {rep.worst_step} over {len(tests)} test "
           f"states, {dt:.1f}s")

