from math import factorial

import numpy as np
import pytest

from cuthho.basis import (
    CellBasis,
    FaceBasis,
    cell_mass_matrix,
    expand_in_basis,
    monomial_exponents,
    poly_diff,
    poly_eval,
    poly_laplacian,
)
from cuthho.errors import NumericalError
from cuthho.quadrature import (
    box_rule,
    gauss_1d,
    map_to_triangles,
    points_for_degree,
    segment_rule,
    triangle_rule,
)

RNG = np.random.default_rng(42)


# -- quadrature --------------------------------------------------------

def test_segment_rule_measures():
    pts, w = segment_rule((0.2, 0.3), (0.3, 0.3), 3)
    assert w.sum() == pytest.approx(0.1, abs=1e-16)


def test_segment_rule_linear():
    pts, w = segment_rule((0.0, 0.0), (1.0, 0.0), 2)
    assert np.dot(w, pts[:, 0]) == pytest.approx(0.5, abs=1e-15)


def test_segment_rule_degree5_exact_with_3_points():
    pts, w = segment_rule((0.0, 0.0), (1.0, 0.0), 3)
    assert np.dot(w, pts[:, 0] ** 4) == pytest.approx(0.2, abs=1e-15)
    assert np.dot(w, pts[:, 0] ** 5) == pytest.approx(1.0 / 6.0, abs=1e-15)


@pytest.mark.parametrize("degree", [1, 3, 5, 7, 9])
def test_triangle_rule_exactness(degree):
    # reference-triangle monomial integrals: a! b! / (a+b+2)!
    pts, w = triangle_rule(degree)
    assert np.all(w > 0)
    assert w.sum() == pytest.approx(0.5, abs=1e-14)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = factorial(a) * factorial(b) / factorial(a + b + 2)
            got = np.dot(w, pts[:, 0] ** a * pts[:, 1] ** b)
            assert got == pytest.approx(exact, rel=1e-13), (a, b)


def test_mapped_triangle_rule_covers_union():
    tris = np.array(
        [[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]], [[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]]]
    )
    pts, w = map_to_triangles(tris, *triangle_rule(3))
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.dot(w, pts[:, 0]) == pytest.approx(0.5, abs=1e-14)


def test_box_rule():
    pts, w = box_rule(0.0, 0.0, 0.5, 0.25, 3)
    assert w.sum() == pytest.approx(0.125, abs=1e-15)
    assert np.dot(w, pts[:, 0] ** 2) == pytest.approx(0.25 * 0.5**3 / 3, rel=1e-14)


def test_points_for_degree():
    for d in range(12):
        n = points_for_degree(d)
        assert 2 * n - 1 >= d
        assert 2 * (n - 1) - 1 < d or n == 1


# -- cell basis --------------------------------------------------------

def test_monomial_order_graded_lex():
    exps = monomial_exponents(2)
    assert exps.tolist() == [[0, 0], [1, 0], [0, 1], [2, 0], [1, 1], [0, 2]]


def test_basis_at_center():
    b = CellBasis(3, (0.3, 0.4), 0.05)
    vals = b.eval(np.array([[0.3, 0.4]]))[0]
    assert vals[0] == 1.0
    assert np.all(vals[1:] == 0.0)


def test_mass_matrix_p0_unit_area():
    tris = np.array(
        [[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]], [[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]]]
    )
    pts, w = map_to_triangles(tris, *triangle_rule(1))
    b = CellBasis(0, (0.5, 0.5), 1.0)
    e = b.eval(pts)
    m = e.T @ (w[:, None] * e)
    assert m.shape == (1, 1)
    assert m[0, 0] == pytest.approx(1.0, abs=1e-14)


def test_mass_matrix_p1_barycentric_centering():
    tris = np.array(
        [[[0.1, 0.2], [0.4, 0.25], [0.3, 0.6]]]
    )
    bary = tris[0].mean(axis=0)
    pts, w = map_to_triangles(tris, *triangle_rule(3))
    b = CellBasis(1, tuple(bary), 0.2)
    e = b.eval(pts)
    m = e.T @ (w[:, None] * e)
    assert abs(m[0, 1]) <= 1e-13 * m[0, 0]
    assert abs(m[0, 2]) <= 1e-13 * m[0, 0]
    assert np.all(np.linalg.eigvalsh(m) > 0)


def test_mass_matrix_p2_against_analytic_integrals():
    # closed-form monomial integrals over the square [0, 0.1]^2
    x0, x1 = 0.0, 0.1
    center = (0.05, 0.05)
    scale = 0.05 * np.sqrt(2.0)

    def seg_int(c, s, p):
        # integral over [x0, x1] of ((x-c)/s)^p dx
        a, b = (x0 - c) / s, (x1 - c) / s
        return s * (b ** (p + 1) - a ** (p + 1)) / (p + 1)

    basis = CellBasis(2, center, scale)
    pts, w = box_rule(x0, x0, x1, x1, 4)
    e = basis.eval(pts)
    m = e.T @ (w[:, None] * e)
    for i, (a1, b1) in enumerate(basis.exps):
        for j, (a2, b2) in enumerate(basis.exps):
            exact = seg_int(0.05, scale, a1 + a2) * seg_int(0.05, scale, b1 + b2)
            assert m[i, j] == pytest.approx(exact, abs=1e-13), (i, j)


def test_derivative_matrices_match_symbolic_differentiation():
    poly = {(0, 0): 0.7, (1, 0): -1.2, (0, 1): 0.4, (2, 1): 2.0, (0, 3): -0.5,
            (3, 0): 1.1, (1, 2): 0.3}
    b = CellBasis(3, (0.45, 0.55), 0.07)
    coef = expand_in_basis(poly, b)
    dx, dy = b.derivative_matrices()
    lower = b.lower(2)
    cx = expand_in_basis(poly_diff(poly, 0), lower)
    cy = expand_in_basis(poly_diff(poly, 1), lower)
    assert np.allclose(dx @ coef, cx, atol=1e-11)
    assert np.allclose(dy @ coef, cy, atol=1e-11)


def test_expand_in_basis_roundtrip():
    poly = {(0, 0): 1.0, (2, 0): -0.3, (1, 1): 0.8, (0, 2): 0.1}
    b = CellBasis(2, (0.2, 0.9), 0.11)
    coef = expand_in_basis(poly, b)
    pts = RNG.uniform(0, 1, size=(20, 2))
    assert np.allclose(b.eval(pts) @ coef, poly_eval(poly, pts), atol=1e-12)


def test_poly_laplacian():
    poly = {(2, 0): 1.0, (0, 2): 2.0, (1, 1): 3.0, (3, 0): 1.0}
    lap = poly_laplacian(poly)
    assert lap[(0, 0)] == pytest.approx(6.0)
    assert lap[(1, 0)] == pytest.approx(6.0)


def test_basis_gradient_matches_fd():
    b = CellBasis(3, (0.5, 0.5), 0.07)
    pts = RNG.uniform(0.4, 0.6, size=(5, 2))
    g = b.grad(pts)
    h = 1e-6
    for comp, dvec in ((0, np.array([h, 0])), (1, np.array([0, h]))):
        fd = (b.eval(pts + dvec) - b.eval(pts - dvec)) / (2 * h)
        assert np.allclose(g[:, :, comp], fd, atol=1e-7)


def test_cell_mass_matrix_spd():
    tris = np.array(
        [[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]], [[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]]]
    )
    m = cell_mass_matrix(tris, CellBasis(2, (0.5, 0.5), 0.7))
    assert np.allclose(m, m.T)
    assert np.all(np.linalg.eigvalsh(m) > 0)


def test_cell_mass_matrix_degenerate_region():
    flat = np.array([[[0.0, 0.0], [1.0, 0.0], [0.5, 1e-16]]])
    with pytest.raises(NumericalError, match="singular mass matrix"):
        cell_mass_matrix(flat, CellBasis(3, (0.5, 0.0), 0.7))


# -- face basis --------------------------------------------------------

def test_face_basis_midpoint_centering():
    fb = FaceBasis(2, (0.2, 0.3), (0.2, 0.4))
    mid = np.array([[0.2, 0.35]])
    vals = fb.eval(mid)[0]
    assert vals[0] == 1.0 and abs(vals[1]) < 1e-14 and abs(vals[2]) < 1e-14
    ends = fb.eval(np.array([[0.2, 0.3], [0.2, 0.4]]))
    assert np.allclose(ends[:, 1], [-1.0, 1.0])


@pytest.mark.parametrize("length", [1e-1, 1e-4, 1e-8])
def test_face_gram_condition_independent_of_cut(length):
    # short sub-faces keep a well-conditioned Gram thanks to the scaling
    fb = FaceBasis(3, (0.5, 0.5), (0.5 + length, 0.5))
    pts, w = segment_rule((0.5, 0.5), (0.5 + length, 0.5), 5)
    chi = fb.eval(pts)
    gram = chi.T @ (w[:, None] * chi)
    cond = np.linalg.cond(gram / length)
    assert cond < 100.0
