import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tvdb import scenarios
from tvdb.energies import EnergyParams
from tvdb.flow import EvolutionProblem, StepperConfig
from tvdb.grid import GridSpec, StateVector, random_state
from tvdb.props import (comparison_check, energies_of_join_meet, gronwall_direct,
                        gronwall_recursive, lattice_inequality_check, monotonicity_pair,
                        positive_part_sq, t_monotonicity_check)

STAR = EnergyParams(epsilon=1.0)


@given(st.floats(1e-4, 0.1), st.floats(0.0, 5.0),
       st.lists(st.floats(0.0, 10.0), min_size=1, max_size=60))
def test_gronwall_two_ways_agree(tau, x0, sources):
    a = gronwall_recursive(tau, x0, sources)
    b = gronwall_direct(tau, x0, sources)
    assert np.allclose(a, b, rtol=1e-10, atol=0.0)


def test_gronwall_without_sources_is_exponential():
    out = gronwall_recursive(0.01, 2.0, [0.0] * 5)
    assert np.allclose(out, 2.0 * np.exp(0.01 * np.arange(6)), rtol=1e-14)


def test_positive_part_sq():
    g = GridSpec(4, 3)
    a = StateVector(g, np.full(g.bulk_shape, -1.0), np.full(4, 2.0), np.zeros(4))
    assert positive_part_sq(a) == pytest.approx(4.0)


def problems(name, grid, T=0.01, tau=1e-3, seed=3):
    u1, t1, u2, t2 = scenarios.paired(name, grid, np.random.default_rng(seed))
    return (EvolutionProblem(STAR, u1, scenarios.constant_source(t1), T, tau),
            EvolutionProblem(STAR, u2, scenarios.constant_source(t2), T, tau))


def test_identical_problems():
    rep = comparison_check(*problems("identical", GridSpec(8, 6)))
    assert rep.ordered_data and rep.passed
    assert np.all(rep.lhs == 0.0) and np.all(rep.rhs == 0.0)


def test_uniform_shift_stays_ordered():
    rep = comparison_check(*problems("uniform_shift", GridSpec(10, 8)))
    assert rep.ordered_data
    assert rep.max_positive_part.max() <= 1e-8
    assert rep.passed


def test_crossing_data_obeys_gronwall_bound():
    rep = comparison_check(*problems("crossing", GridSpec(10, 8)))
    assert not rep.ordered_data
    assert rep.inequality_holds
    assert rep.rhs[-1] > 0
    assert np.allclose(rep.rhs, rep.rhs_direct, rtol=1e-10, atol=0)
    rows = list(rep.rows())
    assert len(rows) == 11 and len(rows[0]) == len(rep.CSV_HEADER)


def test_comparison_rejects_mismatched_problems():
    p1, p2 = problems("identical", GridSpec(8, 6))
    p3 = EvolutionProblem(STAR.relaxed(0.1, 0.1), p2.u0.with_traces_as_boundary(), None, p2.T, p2.tau)
    with pytest.raises(ValueError):
        comparison_check(p1, p3)
    p4 = EvolutionProblem(STAR, p2.u0, None, p2.T, p2.tau / 2)
    with pytest.raises(ValueError):
        comparison_check(p1, p4)


def test_monotonicity_trivial_cases(rng):
    g = GridSpec(8, 6)
    cfg = StepperConfig(inner_tol=1e-10)
    Z = random_state(g, rng)
    val, _ = monotonicity_pair(STAR, cfg, Z, Z, 0.01)
    assert val == 0.0
    # an entrywise smaller input has entrywise smaller resolvent, so the positive part vanishes
    val, _ = monotonicity_pair(STAR, cfg, Z - 1.0, Z, 0.01)
    assert val == 0.0


def test_monotonicity_slack_scales_with_tolerance(rng):
    g = GridSpec(8, 6)
    Z1, Z2 = random_state(g, rng), random_state(g, rng)
    for tol in (1e-6, 1e-9):
        val, slack = monotonicity_pair(STAR, StepperConfig(inner_tol=tol, inner_max_iters=200000),
                                       Z1, Z2, 0.01)
        assert slack <= 2 * tol
        assert val >= -slack


def test_t_monotonicity_small_sweep():
    rep = t_monotonicity_check(STAR, 6, 1, grid=GridSpec(8, 6))
    assert rep.passed
    assert rep.values.shape == (6,)
    assert np.all(rep.values >= -rep.slacks)


def test_lattice_comparable_pairs(rng):
    g = GridSpec(8, 6)
    a = random_state(g, rng)
    b = a + random_state(g, rng).map(np.abs)
    ea, eb, ej, em = energies_of_join_meet(STAR, a, b)
    assert ej == eb and em == ea


def test_lattice_check_anisotropic():
    for p in (STAR, STAR.relaxed(0.1, 0.3)):
        rep = lattice_inequality_check(p, 50, 0, grid=GridSpec(8, 8))
        assert rep.asserted and rep.passed
        assert rep.worst_pair["gap"] == rep.min_gap
        g = GridSpec(*rep.worst_pair["grid"][:2])
        assert len(rep.worst_pair["a"]) == StateVector.zeros(g).flat().size


def test_lattice_check_isotropic_not_asserted():
    rep = lattice_inequality_check(EnergyParams(1.0, tv_mode="isotropic"), 20, 0, grid=GridSpec(8, 8))
    assert not rep.asserted
    assert rep.passed
