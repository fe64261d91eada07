"""Acceptance suite: one test per criterion, each reporting PASS/FAIL with the measured numbers."""

import time
from fractions import Fraction

import numpy as np
import pytest

from sctoeplitz.bergman import WhitneyQuadrature, disk_project, disk_project_monomial
from sctoeplitz.classifier import main1_hypothesis, projection_bounded, weighted_exponent_threshold
from sctoeplitz.geometry import (OVERLAP_BOUND, SQRT2, dist_to_boundary, enlargement_overlap, interiors_disjoint,
                                 regular_polygon, sample_interior, square_boundary_distance, whitney_decompose)
from sctoeplitz.scmap import ConformalMap, koebe_ratio, phi_derivatives_at, psi, solve_parameter_problem
from sctoeplitz.toeplitz import (apply_generalized, check_symbol_condition, constant_symbol, divergence_probe,
                                 e0a_integrand, example_53_identity, example_54_theta_integral,
                                 example_e0b_boundedness, exp_cos_symbol,
                                 f_decomposition_check, inv_boundary_dist_symbol, linear_symbol, partial_sum_tails,
                                 polynomial_function, psi_power_integrand)


def _domains(request):
    return {name: request.getfixturevalue(name) for name in ("square", "lshape", "heptagon")}


@pytest.mark.criterion(1, "Whitney invariants")
def test_whitney_invariants(request, record_property):
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0
    for name, poly in _domains(request).items():
        dec = whitney_decompose(poly, 6)
        assert interiors_disjoint(dec), name
        d = square_boundary_distance(dec.anchors, dec.sides, poly)
        # accepted squares satisfy diam(S) <= dist(S, boundary) <= 4 diam(S) up to 1e-12 relative
        assert np.all(d >= SQRT2 * dec.sides * (1 - 1e-12)), name
        assert np.all(d <= 4 * SQRT2 * dec.sides * (1 + 1e-12)), name
        overlap = enlargement_overlap(dec, sample_interior(poly, 10_000, rng)).max()
        worst = max(worst, int(overlap))
        assert overlap <= OVERLAP_BOUND, name
    elapsed = time.perf_counter() - t0
    record_property("detail", f"max overlap {worst}, {elapsed:.2f} s")
    assert elapsed < 10


@pytest.mark.criterion(2, "Schwarz-Christoffel parameter solver")
def test_parameter_solver(request, record_property):
    t0 = time.perf_counter()
    worst_gap = 0.0
    for n in range(3, 9):
        rng = np.random.default_rng(100 + n)
        start = 2 * np.pi * np.arange(n) / n
        start[3:] += rng.uniform(-0.05, 0.05, n - 3)
        cfg = solve_parameter_problem(regular_polygon(n), initial_args=start)
        rel = np.mod(cfg.args - cfg.args[0], 2 * np.pi)
        worst_gap = max(worst_gap, float(np.max(np.abs(rel - 2 * np.pi * np.arange(n) / n))))
    polys = list(_domains(request).values()) + [regular_polygon(n) for n in range(3, 9)]
    worst_res = 0.0
    for poly in polys:
        m = ConformalMap(poly)
        worst_res = max(worst_res, m.vertex_residual() / poly.diameter)
    elapsed = time.perf_counter() - t0
    record_property("detail", f"gap error {worst_gap:.1e}, residual/diam {worst_res:.1e}, {elapsed:.2f} s")
    assert worst_gap <= 1e-8
    assert worst_res <= 1e-8
    assert elapsed < 30


@pytest.mark.criterion(3, "map round trip and derivative formulas")
def test_roundtrip_and_derivatives(lshape_map, record_property):
    x = np.linspace(-0.99, 0.99, 40)
    z = (x[:, None] + 1j * x[None, :]).ravel()
    z = z[np.abs(z) <= 0.99]
    err = float(np.max(np.abs(lshape_map.phi(psi(lshape_map.config, z)) - z)))

    rng = np.random.default_rng(3)
    pts = sample_interior(lshape_map.polygon, 400, rng)
    pts = pts[dist_to_boundary(pts, lshape_map.polygon) > 0.02][:100]
    h = 1e-4
    zeta = lshape_map.phi(pts)
    d1, d2, d3 = phi_derivatives_at(lshape_map.config, zeta)
    fd1 = (lshape_map.phi(pts + h) - lshape_map.phi(pts - h)) / (2 * h)
    p1, m1 = lshape_map.phi_prime(pts + h), lshape_map.phi_prime(pts - h)
    fd2 = (p1 - m1) / (2 * h)
    fd3 = (p1 - 2 * d1 + m1) / h**2
    rel = max(float(np.max(np.abs(a - b) / np.abs(b))) for a, b in ((fd1, d1), (fd2, d2), (fd3, d3)))
    record_property("detail", f"round trip {err:.1e}, derivative rel {rel:.1e} at {pts.size} points")
    assert pts.size == 100
    assert err <= 1e-9
    assert rel <= 1e-4


@pytest.mark.criterion(4, "Koebe band")
def test_koebe_band(request, record_property):
    rng = np.random.default_rng(4)
    lo, hi = np.inf, -np.inf
    for fixture in ("square_map", "lshape_map", "heptagon_map"):
        m = request.getfixturevalue(fixture)
        k = koebe_ratio(m, sample_interior(m.polygon, 1000, rng))
        lo, hi = min(lo, float(k.min())), max(hi, float(k.max()))
    record_property("detail", f"range [{lo:.4f}, {hi:.4f}]")
    assert lo >= 0.25 - 1e-9 and hi <= 1.0 + 1e-9


def _inner_product_coefficient(m, n, weighted):
    # <z^m conj(z)^n w, z^k> / <z^k, z^k> with k = m - n; radial moments with dA = dx dy / pi
    if m < n:
        return Fraction(0)
    moment = Fraction(1, m + 1) - (Fraction(1, m + 2) if weighted else 0)
    return moment * (m - n + 1)


@pytest.mark.criterion(5, "exact disk projection identities")
def test_disk_identities(record_property):
    for weighted in (False, True):
        for m in range(11):
            for n in range(11):
                got = disk_project_monomial(m, n, with_weight=weighted)
                assert got.coefficient == _inner_product_coefficient(m, n, weighted), (m, n, weighted)
                assert got.exponent == (m - n if m >= n else None)
    z = np.array([0.3 + 0.2j, -0.5j, 0.6])
    worst = 0.0
    for weighted in (False, True):
        for m in range(7):
            for n in range(7):
                def f(u, m=m, n=n, weighted=weighted):
                    return u**m * np.conj(u) ** n * ((1 - np.abs(u) ** 2) if weighted else 1)
                num = disk_project(f, z, numeric=True)
                worst = max(worst, float(np.max(np.abs(num - disk_project_monomial(m, n, weighted).evaluate(z)))))
    record_property("detail", f"numeric max error {worst:.1e}")
    assert worst <= 1e-8


@pytest.mark.criterion(6, "closed-form weighted projection example")
def test_closed_form_example(record_property):
    rows = [example_53_identity(n) for n in range(11)]
    for n, row in enumerate(rows):
        assert row["exact"], n
        assert row["coefficients"] == {str(n): str(Fraction(2, n + 3)), str(n + 1): str(Fraction(-2, n + 3))}
    worst = max(r["numeric_residual"] for r in rows)
    record_property("detail", f"n = 0..10 exact, numeric {worst:.1e}")
    assert worst <= 1e-8


@pytest.mark.criterion(7, "theta integral against closed form")
def test_theta_integral(record_property):
    t0 = time.perf_counter()
    worst = 0.0
    for n in (0, 1, 3):
        for m in (2, 3, 4):
            for r in (0.3, 0.7):
                for z in (0, 0.3 + 0.2j, -0.5):
                    out = example_54_theta_integral(n, m, r, z)
                    closed = 2 * np.pi * (z - 1) ** (m - 1) * ((n + m + 1) * z ** (n + 1) - (n + 1) * z**n) \
                        * r ** (n + m)
                    worst = max(worst, abs(out["numeric"] - closed))
    elapsed = time.perf_counter() - t0
    record_property("detail", f"max residual {worst:.1e}, {elapsed:.2f} s")
    assert worst <= 1e-8
    assert elapsed < 5


@pytest.mark.criterion(8, "classifier truth table")
def test_classifier_truth_table(record_property):
    assert projection_bounded(3, 1.99) and projection_bounded(3, 0.3) and projection_bounded("3", "1999/1000")
    assert projection_bounded(5, 1.5)
    assert not projection_bounded(5, 1.8)
    assert not projection_bounded(1.2, 1.9)
    ps = np.linspace(1.01, 9.0, 100)
    alphas = np.linspace(0.01, 1.99, 100)
    checked = 0
    for p in ps:
        fp = Fraction(repr(float(p)))
        for a in alphas:
            fa = Fraction(repr(float(a)))
            if fp >= 2:
                expect = (fp - 2) * (fa - 1) < 2
            else:
                expect = (2 - fp) * (fa - 1) < 2 * (fp - 1)
            got = projection_bounded(p, a)
            assert got == expect, (p, a)
            if main1_hypothesis(p, a):
                assert got, (p, a)
            checked += 1
    record_property("detail", f"{checked} grid points")
    assert checked == 10_000


@pytest.mark.criterion(9, "symbol condition")
def test_symbol_condition(square, record_property):
    const = check_symbol_condition(constant_symbol(2.5), square, 6)
    inv = check_symbol_condition(inv_boundary_dist_symbol(square), square, 6)
    growth = [inv.growth_factors[l] for l in (4, 5, 6)]
    record_property("detail", f"constant sup {const.sup_average:.6f}, 1/dist growth {np.round(growth, 3).tolist()}")
    assert const.verdict == "PASS" and abs(const.sup_average - 2.5) <= 1e-12
    assert 3 in inv.level_maxima
    assert inv.verdict == "FAIL"
    assert min(growth) >= 1.8


@pytest.mark.criterion(10, "integration by parts identity")
def test_integration_by_parts(square_map, square, record_property):
    dec = whitney_decompose(square, 5)
    squares = dec.squares[:: max(1, len(dec) // 20)][:20]
    assert len(squares) == 20
    worst = 0.0
    for a in (linear_symbol(0.3, 1.0, 1.0), exp_cos_symbol()):
        for f in (polynomial_function([0, 1]), polynomial_function([0.5, -1, 2])):
            for sq in squares:
                out = f_decomposition_check(a, f, square_map, sq, 0.4 + 0.6j)
                worst = max(worst, out["relative"])
    record_property("detail", f"max relative residual {worst:.1e}")
    assert worst <= 1e-6


@pytest.mark.criterion(11, "reproducing property and partial-sum convergence")
def test_reproducing(square_map, square, square_quad8, record_property):
    z = np.array([0.5 + 0.5j, 0.25 + 0.3j, 0.7 + 0.2j, 0.4 + 0.8j, 0.8 + 0.75j])
    f = polynomial_function([0, 0, 1])
    app = apply_generalized(constant_symbol(1), f, square_quad8, z)
    err = float(np.max(np.abs(app.extrapolated - z**2)))
    norm_quad = WhitneyQuadrature(square_map, whitney_decompose(square, 4), order=4)
    tails = partial_sum_tails(constant_symbol(1), f, square_quad8, norm_quad, 2.0)
    record_property("detail", f"extrapolated error {err:.1e}, tails {np.round(tails['tails'], 4).tolist()}")
    assert err <= 1e-3
    assert tails["monotone"]


@pytest.mark.criterion(12, "divergence probes")
def test_divergence_probes(corner18, corner19, record_property):
    angle = [float(corner18.config.args[0])]
    p5 = divergence_probe(psi_power_integrand(corner18.config, 5.0, 0.5**10), singular_angles=angle)
    p3 = divergence_probe(psi_power_integrand(corner18.config, 3.0, 0.5**6), singular_angles=angle)
    e0a = divergence_probe(e0a_integrand(corner19.config, 0), singular_angles=[float(corner19.config.args[0])])
    record_property("detail", f"p=5 {p5.verdict} exponent {p5.growth_exponent:.3f}, p=3 {p3.verdict}, "
                              f"e0a {e0a.verdict}")
    assert corner18.polygon.alpha_max == pytest.approx(1.8, abs=1e-10)
    assert corner19.polygon.alpha_max == pytest.approx(1.9, abs=1e-10)
    assert p5.verdict == "DIVERGENT"
    assert abs(p5.growth_exponent + 0.4) <= 0.1
    assert p3.verdict == "CONVERGENT"
    assert e0a.verdict == "DIVERGENT"


@pytest.mark.slow
@pytest.mark.criterion(13, "weighted regime norm table")
def test_weighted_regime(corner19, record_property):
    p, alpha = 1.2, 1.9
    t = 2 * float(weighted_exponent_threshold(p, alpha))
    out = example_e0b_boundedness(corner19.config, p, t, [1.0, 1.5, 2.0, 2.5], vertex=0)
    table, control = out["table"], out["control"]
    record_property("detail", f"t = {t}, ratios {[round(r['ratio'], 4) for r in table.rows]}, "
                              f"growth {table.growth:.3f}, control {control.verdict}")
    assert all(r["status"] == "ok" for r in table.rows)
    assert table.growth <= 0.10 and table.bounded
    assert control.verdict == "DIVERGENT"
