import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tvdb.grid import (GridSpec, ShapeError, StateVector, forward_gradient,
                       forward_gradient_adjoint, inner_product_H, lattice_join, lattice_meet,
                       norm_H, positive_part, random_state, surface_gradient,
                       surface_laplacian_symbol)

grids = st.builds(GridSpec, st.integers(4, 12), st.integers(3, 9),
                  st.floats(0.5, 3.0), st.floats(0.5, 3.0))


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(3, 5)
    with pytest.raises(ValueError):
        GridSpec(8, 2)
    with pytest.raises(ValueError):
        GridSpec(8, 4, lx=0.0)
    g = GridSpec(8, 4, 2.0, 1.0)
    assert g.dx == 0.25 and g.dy == 0.25
    assert g.bulk_shape == (8, 5)


def test_bulk_weights_sum_to_area():
    g = GridSpec(10, 7, 2.0, 3.0)
    w = g.bulk_weights()
    assert np.isclose(w.sum(), 6.0, rtol=0, atol=1e-12)
    assert w[0, 0] == 0.5 * g.dx * g.dy
    assert w[0, 3] == g.dx * g.dy


def test_constant_state_norm():
    # bulk area 1, two boundary rings of length 1: |1|^2 = 1 + 1 + 1
    g = GridSpec(4, 3)
    one = StateVector.constant(g, 1.0)
    assert inner_product_H(one, one) == pytest.approx(3.0, abs=1e-14)


def test_single_interior_node_norm():
    g = GridSpec(4, 4)
    bulk = np.zeros(g.bulk_shape)
    bulk[1, 2] = 2.0
    s = StateVector(g, bulk, np.zeros(4), np.zeros(4))
    assert inner_product_H(s, s) == pytest.approx(4.0 * g.dx * g.dy, abs=1e-15)
    assert inner_product_H(s, s) == pytest.approx(0.25)


@given(grids, st.integers(0, 2 ** 31))
def test_inner_product_axioms(g, seed):
    r = np.random.default_rng(seed)
    a, b, c = (random_state(g, r) for _ in range(3))
    alpha = r.standard_normal()
    ab, ba = inner_product_H(a, b), inner_product_H(b, a)
    assert abs(ab - ba) <= 1e-12 * (1 + abs(ab))
    lhs = inner_product_H(alpha * a + b, c)
    rhs = alpha * inner_product_H(a, c) + inner_product_H(b, c)
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs) + abs(rhs))
    assert inner_product_H(a, a) > 0
    assert norm_H(a) == pytest.approx(np.sqrt(inner_product_H(a, a)))


@given(grids, st.integers(0, 2 ** 31))
def test_gradient_adjoint_identity(g, seed):
    r = np.random.default_rng(seed)
    w = r.standard_normal(g.bulk_shape)
    p = r.standard_normal((2, g.nx, g.ny))
    lhs = float((forward_gradient(w, g) * p).sum())
    rhs = float((w * forward_gradient_adjoint(p, g)).sum())
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))


def test_forward_gradient_values():
    g = GridSpec(4, 3)
    X, Y = g.mesh()
    grad = forward_gradient(Y.copy(), g)
    assert np.allclose(grad[1], 1.0) and np.allclose(grad[0], 0.0)
    # periodic wrap: x-difference of the last column closes the ring
    grad = forward_gradient(X.copy(), g)
    assert np.allclose(grad[0][:-1], 1.0)
    assert np.allclose(grad[0][-1], -(g.nx - 1))


def test_forward_gradient_shape_check():
    g = GridSpec(4, 3)
    with pytest.raises(ShapeError):
        forward_gradient(np.zeros((4, 3)), g)


def test_surface_symbol_matches_dense_matrix():
    g = GridSpec(9, 3, lx=2.0)
    D = np.stack([surface_gradient(e, g) for e in np.eye(g.nx)], axis=1)
    eig = np.sort(np.linalg.eigvalsh(D.T @ D))
    sym = surface_laplacian_symbol(g)
    full = np.concatenate([sym, sym[1:(g.nx + 1) // 2]])
    assert np.allclose(np.sort(full), eig, atol=1e-10)


def test_state_is_immutable_and_validated():
    g = GridSpec(4, 3)
    s = StateVector.zeros(g)
    with pytest.raises(ValueError):
        s.bulk[0, 0] = 1.0
    with pytest.raises(ShapeError):
        StateVector(g, np.zeros((4, 3)), np.zeros(4), np.zeros(4))
    with pytest.raises(ValueError):
        StateVector(g, np.full(g.bulk_shape, np.nan), np.zeros(4), np.zeros(4))
    with pytest.raises(ShapeError):
        s + StateVector.zeros(GridSpec(5, 3))


def test_flat_round_trip_and_traces(rng):
    g = GridSpec(5, 4)
    s = random_state(g, rng)
    assert StateVector.from_flat(g, s.flat()).allclose(s, atol=0)
    assert not s.is_trace_constrained()
    t = s.with_traces_as_boundary()
    assert t.is_trace_constrained()
    assert np.array_equal(t.bottom, s.bulk[:, 0]) and np.array_equal(t.top, s.bulk[:, -1])


def test_arithmetic_with_numpy_scalars(rng):
    g = GridSpec(4, 3)
    s = random_state(g, rng)
    assert (np.float64(2.0) * s).allclose(s + s)
    assert (s / 2.0 + s / 2.0).allclose(s)
    assert (-s + s).max_abs() == 0.0


def test_lattice_operations(rng):
    g = GridSpec(6, 4)
    a, b = random_state(g, rng), random_state(g, rng)
    j, m = lattice_join(a, b), lattice_meet(a, b)
    assert np.all(j.flat() >= a.flat()) and np.all(j.flat() >= b.flat())
    assert (j + m).allclose(a + b, atol=1e-14)
    assert (positive_part(a - b) - positive_part(b - a)).allclose(a - b, atol=1e-14)


def test_difference_operators_are_linear(rng):
    g = GridSpec(7, 5, 1.5, 0.5)
    a, b = rng.standard_normal(g.bulk_shape), rng.standard_normal(g.bulk_shape)
    al, be = rng.standard_normal(2)
    lhs = forward_gradient(al * a + be * b, g)
    assert np.allclose(lhs, al * forward_gradient(a, g) + be * forward_gradient(b, g), rtol=0, atol=1e-12 * np.abs(lhs).max())
    u, v = a[:, 0], b[:, 0]
    lhs = surface_gradient(al * u + be * v, g)
    assert np.allclose(lhs, al * surface_gradient(u, g) + be * surface_gradient(v, g), rtol=0, atol=1e-12 * np.abs(lhs).max())
