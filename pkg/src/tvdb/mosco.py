"""Boundary-layer liftings, recovery sequences and the Mosco convergence harness.

The relaxed energies only see trace-constrained states, so a target state
with a trace jump is approached by bulk fields that bend steeply inside a
thin layer next to the boundary.  The layer is built from the profile
``(1 - d / r)^+`` where ``d`` is the distance to the boundary component.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energies import EnergyParams, eval_phi_dk, eval_phi_star, sandwich_constant
from .flow import EvolutionProblem, StepperConfig, Trajectory, run_flow
from .grid import GridSpec, StateVector, forward_gradient, norm_H
from .parallel import pmap


class DegenerateLayerError(ValueError):
    """The requested layer is thinner than one cell."""


class ResolutionError(ValueError):
    """The grid is too coarse for the lifting at the requested level."""

    def __init__(self, message: str, min_ny: int):
        super().__init__(message)
        self.min_ny = min_ny


# schedules


@dataclass(frozen=True)
class SweepSchedule:
    deltas: tuple
    kappas: tuple

    def __post_init__(self):
        d = tuple(float(v) for v in self.deltas)
        k = tuple(float(v) for v in self.kappas)
        object.__setattr__(self, "deltas", d)
        object.__setattr__(self, "kappas", k)
        if len(d) != len(k):
            raise ValueError("delta and kappa schedules differ in length")
        if len(d) < 4:
            raise ValueError(f"a sweep needs at least 4 entries, got {len(d)}")
        for name, seq in (("delta", d), ("kappa", k)):
            if not all(0.0 < v <= 1.0 for v in seq):
                raise ValueError(f"{name} schedule entries must lie in (0, 1]")
            if not all(a > b for a, b in zip(seq, seq[1:])):
                raise ValueError(f"{name} schedule must be strictly decreasing")

    @classmethod
    def geometric(cls, n_sweep: int, ratio: float = 0.5) -> "SweepSchedule":
        vals = tuple(ratio ** n for n in range(1, n_sweep + 1))
        return cls(vals, vals)

    def __len__(self):
        return len(self.deltas)

    def params(self, base: EnergyParams, n: int) -> EnergyParams:
        """Relaxed parameters for sweep index ``n`` (1-based)."""
        kind = base.regularizer.kind if base.regularizer is not None else "huber"
        return base.relaxed(self.deltas[n - 1], self.kappas[n - 1], kind)


# boundary layers


def _distance_rows(grid: GridSpec, side: str) -> np.ndarray:
    j = np.arange(grid.ny + 1)
    if side == "bottom":
        return j * grid.dy
    if side == "top":
        # counted from the top row so that the trace row sits at distance 0 exactly
        return (grid.ny - j) * grid.dy
    raise ValueError(f"side must be 'bottom' or 'top', got {side!r}")


def layer_profile(grid: GridSpec, r: float, side: str = "bottom") -> np.ndarray:
    """Row profile ``(1 - d_j / r)^+`` of length ``ny + 1``."""
    return np.maximum(1.0 - _distance_rows(grid, side) / r, 0.0)


def boundary_layer_extension(varpi, r: float, grid: GridSpec, side: str = "bottom") -> np.ndarray:
    """Bulk field equal to ``varpi`` on one boundary row, decaying linearly to 0 at distance ``r``."""
    varpi = np.asarray(varpi, dtype=float)
    if varpi.shape != (grid.nx,):
        raise ValueError(f"varpi has shape {varpi.shape}, expected ({grid.nx},)")
    if not np.all(np.isfinite(varpi)):
        raise ValueError("varpi has non-finite entries")
    if r < grid.dy:
        raise DegenerateLayerError(f"layer width {r:g} is below one cell (dy = {grid.dy:g})")
    if r > 0.5 * grid.ly * (1 + 1e-12):
        raise ValueError(f"layer width {r:g} exceeds half the strip height {0.5 * grid.ly:g}")
    return np.outer(varpi, layer_profile(grid, r, side))


def _profile_l2sq(grid: GridSpec, r: float) -> float:
    """Quadrature of ``(1 - y/r)^+ ** 2`` over ``[0, ly]`` with the bulk weights."""
    w = grid.bulk_weights()[0] / grid.dx
    return float(w @ layer_profile(grid, r) ** 2)


def _profile_row_mass(grid: GridSpec, r: float) -> float:
    """``sum_j dy (1 - y_j/r)^+`` over the rows entering the x-differences."""
    return float(grid.dy * layer_profile(grid, r)[:-1].sum())


def select_layer_width(varpi, level: int, grid: GridSpec) -> float:
    """Widest layer meeting the three smallness conditions at level ``level``.

    With ``t = 2^-(level+1)`` the conditions are ``r <= t``, ``|ext|_L2 < t`` and
    horizontal variation ``< t``; they are evaluated with the same quadrature
    as the energies, so they hold exactly for the discrete field.
    """
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    varpi = np.asarray(varpi, dtype=float)
    t = 2.0 ** (-level - 1)
    l2sq = grid.dx * float(varpi @ varpi)
    tvx = float(np.abs(np.roll(varpi, -1) - varpi).sum())
    r_hi = min(t, 0.5 * grid.ly)

    def ok(r):
        return (_profile_l2sq(grid, r) * l2sq < t * t * (1 - 1e-9)
                and _profile_row_mass(grid, r) * tvx < t * (1 - 1e-9))

    if r_hi < grid.dy or not ok(grid.dy):
        limits = [t, 2.0 * t * t / l2sq if l2sq > 0 else np.inf,
                  t / tvx if tvx > 0 else np.inf]
        min_ny = int(np.ceil(grid.ly / min(limits))) + 1
        raise ResolutionError(
            f"level {level} needs a layer thinner than one cell (dy = {grid.dy:g}); "
            f"use ny >= {min_ny}", min_ny)
    if ok(r_hi):
        return r_hi
    lo, hi = grid.dy, r_hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class Lifting:
    bulk: np.ndarray
    r_bottom: float
    r_top: float


def lifting_layers(vgamma_bottom, vgamma_top, level: int, grid: GridSpec) -> Lifting:
    bulk = np.zeros(grid.bulk_shape)
    widths = []
    for side, v in (("bottom", vgamma_bottom), ("top", vgamma_top)):
        v = np.asarray(v, dtype=float)
        if not np.any(v):
            widths.append(0.0)
            continue
        r = select_layer_width(v, level, grid)
        bulk += boundary_layer_extension(v, r, grid, side)
        widths.append(r)
    return Lifting(bulk, *widths)


def lifting_construct(vgamma_bottom, vgamma_top, level: int, grid: GridSpec) -> np.ndarray:
    """Bulk field with traces ``vgamma_*``, L2 norm below ``2^-level`` and small excess variation."""
    return lifting_layers(vgamma_bottom, vgamma_top, level, grid).bulk


# recovery sequences


def mollifier_passes(level: int) -> int:
    """Box-filter passes at ``level``; zero from level 5 on so that the sequence reaches the target."""
    return 2 ** (4 - level) if level <= 4 else 0


def box_filter(bulk: np.ndarray) -> np.ndarray:
    """One 3x3 box-filter pass; trace rows are averaged along x only."""
    sx = (np.roll(bulk, 1, axis=0) + bulk + np.roll(bulk, -1, axis=0)) / 3.0
    out = sx.copy()
    out[:, 1:-1] = (sx[:, :-2] + sx[:, 1:-1] + sx[:, 2:]) / 3.0
    return out


def mollify(bulk: np.ndarray, level: int) -> np.ndarray:
    out = np.array(bulk, dtype=float)
    for _ in range(mollifier_passes(level)):
        out = box_filter(out)
    return out


@dataclass(frozen=True)
class Recovery:
    state: StateVector
    level: int
    mollified: np.ndarray
    lifting: Lifting


def recovery_construct(W_hat: StateVector, level: int) -> Recovery:
    grid = W_hat.grid
    phi = mollify(W_hat.bulk, level)
    lift = lifting_layers(W_hat.bottom - phi[:, 0], W_hat.top - phi[:, -1], level, grid)
    bulk = phi + lift.bulk
    bulk[:, 0] = W_hat.bottom
    bulk[:, -1] = W_hat.top
    return Recovery(StateVector.from_bulk(grid, bulk), level, phi, lift)


def recovery_sequence(W_hat: StateVector, level: int) -> StateVector:
    """Trace-constrained approximation of ``W_hat`` at mollification level ``level``."""
    return recovery_construct(W_hat, level).state


def bulk_l2(a: np.ndarray, grid: GridSpec) -> float:
    return float(np.sqrt(np.sum(grid.bulk_weights() * a * a)))


def dirichlet_integral(bulk: np.ndarray, grid: GridSpec) -> float:
    return float(grid.dx * grid.dy * (forward_gradient(bulk, grid) ** 2).sum())


def select_level(W_hat: StateVector, kappa: float, max_level: int = 8) -> Recovery:
    """Finest level whose recovery keeps ``(kappa^2 / 2) * Dirichlet <= 2^-level``.

    Falls back to the coarsest constructible level when no level qualifies.
    """
    feasible = []
    for level in range(1, max_level + 1):
        try:
            feasible.append(recovery_construct(W_hat, level))
        except ResolutionError:
            continue
    if not feasible:
        recovery_construct(W_hat, 1)  # re-raise with the resolution message
    good = [rc for rc in feasible
            if 0.5 * kappa ** 2 * dirichlet_integral(rc.state.bulk, W_hat.grid) <= 2.0 ** -rc.level]
    return good[-1] if good else feasible[0]


# sweeps


@dataclass
class RecoveryReport:
    deltas: list
    kappas: list
    levels: list
    phi_n: list  # EnergyBreakdown per n
    phi_star: float
    gaps: list
    kappa_terms: list
    recovery_errors: list
    bounds: list
    r_bottom: list
    r_top: list
    level_condition_met: list
    sup_traj_dist: list = field(default_factory=list)

    @property
    def monotone_from(self) -> int:
        """Smallest 1-based index after which the gaps decrease strictly."""
        g = self.gaps
        n0 = len(g)
        while n0 > 1 and g[n0 - 2] > g[n0 - 1]:
            n0 -= 1
        return n0

    @property
    def bounds_hold(self) -> bool:
        return all(gap <= b for gap, b in zip(self.gaps, self.bounds))

    CSV_HEADER = ("n", "delta", "kappa", "level", "phi_n", "phi_star", "gap", "sup_traj_dist")

    def rows(self):
        for i in range(len(self.gaps)):
            dist = self.sup_traj_dist[i] if i < len(self.sup_traj_dist) else ""
            yield (i + 1, self.deltas[i], self.kappas[i], self.levels[i],
                   self.phi_n[i].total, self.phi_star, self.gaps[i], dist)


def mosco_m2_sweep(params_base: EnergyParams, schedule: SweepSchedule, W_hat: StateVector,
                   max_level: int = 8) -> RecoveryReport:
    """Evaluate the relaxed energies along a recovery sequence of ``W_hat``.

    ``bounds[n]`` is the exact triangle bound sandwich + kappa term + recovery
    error, which every gap must respect up to rounding.
    """
    phi_star = eval_phi_star(params_base, W_hat).total
    grid = W_hat.grid

    def one(n):
        p = schedule.params(params_base, n)
        rc = select_level(W_hat, p.kappa, max_level)
        b = eval_phi_dk(p, rc.state)
        rec_err = abs(eval_phi_star(p, rc.state).total - phi_star)
        return rc, b, rec_err, sandwich_constant(p, grid)

    results = pmap(one, range(1, len(schedule) + 1))
    rep = RecoveryReport(list(schedule.deltas), list(schedule.kappas), [], [], phi_star,
                         [], [], [], [], [], [], [])
    for rc, b, rec_err, sw in results:
        gap = abs(b.total - phi_star)
        rep.levels.append(rc.level)
        rep.phi_n.append(b)
        rep.gaps.append(gap)
        rep.kappa_terms.append(b.kappa_dirichlet)
        rep.recovery_errors.append(rec_err)
        rep.bounds.append(sw + b.kappa_dirichlet + rec_err + 1e-12 * (1 + abs(phi_star)))
        rep.r_bottom.append(rc.lifting.r_bottom)
        rep.r_top.append(rc.lifting.r_top)
        rep.level_condition_met.append(b.kappa_dirichlet <= 2.0 ** -rc.level)
    return rep


@dataclass
class LowerBoundReport:
    phi_n: list
    phi_star_of_seq: list
    sandwich: list
    slacks: list  # phi_n - (phi_star(z_n) - sandwich), must be >= 0
    distances: list
    phi_star_target: float

    @property
    def holds(self) -> bool:
        return all(s >= -1e-12 * (1 + abs(p)) for s, p in zip(self.slacks, self.phi_n))

    @property
    def liminf_excess(self) -> float:
        """Tail minimum of ``phi_n - phi_star(target)`` over the second half of the sweep."""
        tail = self.phi_n[len(self.phi_n) // 2:]
        return float(min(tail) - self.phi_star_target)


def mosco_m1_probe(params_base: EnergyParams, schedule: SweepSchedule, target: StateVector,
                   sequence_builder) -> LowerBoundReport:
    """Check the lower-bound inequality along ``sequence_builder(n)`` for n = 1..N."""
    rep = LowerBoundReport([], [], [], [], [], eval_phi_star(params_base, target).total)
    for n in range(1, len(schedule) + 1):
        p = schedule.params(params_base, n)
        z = sequence_builder(n)
        phi = eval_phi_dk(p, z).total
        star = eval_phi_star(p, z).total
        sw = sandwich_constant(p, z.grid)
        rep.phi_n.append(phi)
        rep.phi_star_of_seq.append(star)
        rep.sandwich.append(sw)
        rep.slacks.append(phi - (star - sw))
        rep.distances.append(norm_H(z - target))
    return rep


@dataclass
class TrajectoryConvergenceReport:
    singular: Trajectory
    relaxed: list  # Trajectory per n
    levels: list
    initial_distances: list
    sup_distances: list
    energy_integral_gaps: list

    def tail_decreasing(self, start: int) -> bool:
        g = self.energy_integral_gaps[start - 1:]
        return all(a > b for a, b in zip(g, g[1:]))


def _energy_integral(traj: Trajectory) -> float:
    return float(traj.tau * sum(b.total for b in traj.energies[1:]))


def trajectory_convergence(problem_singular: EvolutionProblem, schedule: SweepSchedule,
                           config: StepperConfig | None = None, max_level: int = 8,
                           kind: str = "huber") -> TrajectoryConvergenceReport:
    """Solve the singular flow once and the relaxed flows along ``schedule``; compare."""
    config = config or StepperConfig()
    base = problem_singular.params
    if not base.singular:
        raise ValueError("trajectory_convergence expects singular parameters")
    base_kind = EnergyParams(base.epsilon, 0.0, None, base.tv_mode)

    def solve(n):
        if n == 0:
            return None, run_flow(problem_singular, config)
        p = base_kind.relaxed(schedule.deltas[n - 1], schedule.kappas[n - 1], kind)
        rc = select_level(problem_singular.u0, p.kappa, max_level)
        prob = EvolutionProblem(p, rc.state, problem_singular.source, problem_singular.T,
                                problem_singular.tau)
        return rc, run_flow(prob, config)

    results = pmap(solve, range(0, len(schedule) + 1))
    sing = results[0][1]
    e_sing = _energy_integral(sing)
    rep = TrajectoryConvergenceReport(sing, [], [], [], [], [])
    for rc, traj in results[1:]:
        rep.relaxed.append(traj)
        rep.levels.append(rc.level)
        rep.initial_distances.append(norm_H(traj.states[0] - problem_singular.u0))
        rep.sup_distances.append(max(norm_H(a - b) for a, b in zip(traj.states, sing.states)))
        rep.energy_integral_gaps.append(abs(_energy_integral(traj) - e_sing))
    return rep
