from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sctoeplitz.bergman import (ONE_MINUS_ABS2, DiskFunction, DiskPolynomial, DivergenceError, KernelContext,
                                WhitneyQuadrature, calibrate_taylor_constant, corner_power_family,
                                derivative_norm_ratio, disk_kernel, disk_norm_p, disk_project, disk_project_monomial,
                                kernel, maximal_project, richardson, szego, taylor_norm_sandwich)
from sctoeplitz.geometry import whitney_decompose


def radial_moment(k, weighted):
    """int_D |z|^(2k) (1 - |z|^2)^weighted dA with dA = dx dy / pi, as a rational."""
    if weighted:
        return Fraction(1, k + 1) - Fraction(1, k + 2)
    return Fraction(1, k + 1)


def projection_by_inner_products(m, n, weighted):
    """Coefficient of z^(m-n) in P(z^m conj(z)^n [1 - |z|^2]) from <g, z^k> / <z^k, z^k>."""
    if m < n:
        return Fraction(0)
    k = m - n
    return radial_moment(m, weighted) / radial_moment(k, False)


def test_monomial_projection_examples():
    p = disk_project_monomial(3, 1)
    assert (p.coefficient, p.exponent) == (Fraction(3, 4), 2)
    assert disk_project_monomial(2, 5).exponent is None
    q = disk_project_monomial(4, 1, with_weight=True)
    assert (q.coefficient, q.exponent) == (Fraction(2, 15), 3)


def test_weighted_power_projection():
    # P((1 - |w|^2) w^3) = z^3 / 5
    poly = ONE_MINUS_ABS2 * DiskPolynomial.monomial(3)
    assert poly.project() == {3: Fraction(1, 5)}
    assert (DiskPolynomial.monomial(2) * DiskPolynomial({(0, 5): 1})).project() == {}


@pytest.mark.parametrize("weighted", [False, True])
def test_monomial_projection_against_inner_products(weighted):
    for m in range(11):
        for n in range(11):
            got = disk_project_monomial(m, n, with_weight=weighted)
            expect = projection_by_inner_products(m, n, weighted)
            assert got.coefficient == expect
            assert got.exponent == (m - n if m >= n else None)


def test_numeric_projection_of_monomial():
    z = np.array([0.2 + 0.1j, -0.4j])
    num = disk_project(lambda w: w**4 * np.conj(w) ** 2, z, numeric=True)
    assert np.allclose(num, 0.6 * z**2, atol=1e-10)


def test_analytic_function_is_reproduced():
    f = DiskFunction([1, -2, 0.5j])
    z = np.array([0.3, -0.5 + 0.2j])
    assert np.allclose(disk_project(f, z), f(z))
    assert np.allclose(disk_project(f, z, numeric=True), f(z), atol=1e-10)


def test_disk_function_json_roundtrip():
    f = DiskFunction([1, 2j, -0.25])
    g = DiskFunction.from_json(f.to_json())
    assert np.array_equal(g.coefficients, f.coefficients)
    with pytest.raises(ValueError):
        DiskFunction()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), min_size=1, max_size=8),
       st.complex_numbers(max_magnitude=0.99, allow_nan=False, allow_infinity=False))
def test_horner_matches_direct(coeffs, z):
    f = DiskFunction(coeffs)
    assert abs(f(z) - f.direct(z)) <= 1e-12 * (1 + np.sum(np.abs(coeffs)))


def test_disk_polynomial_arithmetic():
    a = DiskPolynomial({(1, 0): 2, (0, 1): -1})
    b = DiskPolynomial({(1, 1): Fraction(1, 3)})
    z = 0.3 - 0.4j
    assert (a * b)(z) == pytest.approx(a(z) * b(z))
    assert (a - a).terms == {}
    assert (2 * a).terms[(1, 0)] == 4


def test_szego_reproduces_and_annihilates():
    z = np.array([0.1 + 0.2j, -0.6])
    assert np.allclose(szego(lambda t: np.exp(3j * t), z), z**3, atol=1e-14)
    assert np.allclose(szego(lambda t: np.exp(-1j * t), z), 0, atol=1e-14)


@pytest.mark.parametrize("n,p", [(0, 3.0), (1, 5.0), (3, 2.5)])
def test_disk_norm_of_monomial(n, p):
    assert disk_norm_p(lambda w: w**n, p) == pytest.approx(2 / (n * p + 2), rel=1e-10)


def test_taylor_sandwich_for_identity():
    s = taylor_norm_sandwich(DiskFunction([0, 1]), 5.0)
    assert s.lower_sum == pytest.approx(0.5)
    assert s.norm_p == pytest.approx(2 / 7, rel=1e-10)
    assert s.upper_sum == pytest.approx(4.0)
    assert s.constant == calibrate_taylor_constant(5.0)
    assert s.holds


def test_taylor_sandwich_requires_p_above_two():
    with pytest.raises(ValueError):
        taylor_norm_sandwich(DiskFunction([0, 1]), 2.0)


def test_richardson_removes_geometric_error():
    seq = [1.0 + 3 * 2.0**-l + 5 * 4.0**-l for l in range(3, 7)]
    assert richardson(seq, 2) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        richardson(seq[:1], 1)


def test_kernel_hermitian_and_positive(lshape_map):
    ctx = KernelContext(lshape_map)
    z, w = np.array([0.5 + 0.5j, 1.5 + 0.3j]), np.array([0.2 + 1.7j, 0.8 + 0.9j])
    assert np.allclose(kernel(ctx, z, w), np.conj(kernel(ctx, w, z)))
    diag = kernel(ctx, z, z)
    assert np.all(diag.real > 0) and np.allclose(diag.imag, 0)


def test_disk_kernel_origin():
    assert disk_kernel(0, 0.7) == 1.0


def test_kernel_context_cache_is_consistent(square_map):
    ctx = KernelContext(square_map)
    w = np.array([0.3 + 0.3j, 0.3 + 0.3j, 0.6 + 0.2j])
    z1, d1 = ctx.phi_data(w)
    z2, d2 = ctx.phi_data(w[::-1])
    assert np.array_equal(z1, z2[::-1]) and np.array_equal(d1, d2[::-1])


def test_reproducing_on_square(square_quad8):
    z = 0.5 + 0.5j
    vals = square_quad8.kernel_at(z) * square_quad8.points**2
    levels = square_quad8.level_integrals(vals)
    seq = [levels[l][0] for l in sorted(levels)]
    assert abs(richardson(seq, 2) - z**2) <= 1e-4


def test_quadrature_weights_cover_the_square(square_quad5):
    total = square_quad5.integrate(np.ones_like(square_quad5.weights))
    collar = square_quad5.decomposition.collar
    # the truncation misses at most the boundary collar of the unit square
    assert 1 / np.pi * (1 - 2 * collar) ** 2 <= total <= 1 / np.pi


def test_maximal_projection_finite_and_divergent(square_quad8):
    z = np.array([0.5 + 0.5j])
    val = maximal_project(square_quad8, lambda w: np.ones(w.shape), z)
    assert np.isfinite(val).all() and val[0] > 0
    with pytest.raises(DivergenceError):
        maximal_project(square_quad8, square_quad8.boundary_distance ** -2.0, z)


def test_derivative_ratios_bounded_on_corner_family(lshape_map, lshape):
    family = corner_power_family(lshape_map, lshape.max_vertex, [0.1, 0.2, 0.3])
    coarse, fine = (derivative_norm_ratio(WhitneyQuadrature(lshape_map, whitney_decompose(lshape, L), order=4),
                                          family, 2.0) for L in (5, 6))
    for key in ("max_first", "max_second"):
        assert fine[key] < 1.0
        assert fine[key] == pytest.approx(coarse[key], rel=0.10)
