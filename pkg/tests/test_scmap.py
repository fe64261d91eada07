import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sctoeplitz.geometry import Polygon, dist_to_boundary, regular_polygon, sample_interior, whitney_decompose
from sctoeplitz.scmap import (ConformalMap, DomainError, InverseMapError, PrevertexConfig, corner_domain,
                              equispaced_config, koebe_ratio, map_from_config, phi_derivatives_at, psi, psi_prime,
                              solve_parameter_problem, whitney_kernel_bounds)


def aligned_gap_error(args):
    """Deviation of prevertex arguments from equispaced after rotating the first to zero."""
    n = len(args)
    rel = np.mod(np.asarray(args) - args[0], 2 * np.pi)
    return float(np.max(np.abs(rel - 2 * np.pi * np.arange(n) / n)))


@pytest.mark.parametrize("n", range(4, 9))
def test_regular_polygon_from_perturbed_start(n):
    poly = regular_polygon(n)
    rng = np.random.default_rng(n)
    start = 2 * np.pi * np.arange(n) / n + np.concatenate([[0, 0, 0], rng.uniform(-0.05, 0.05, n - 3)])
    cfg = solve_parameter_problem(poly, initial_args=start)
    assert aligned_gap_error(cfg.args) <= 1e-8


def test_equispaced_configuration_reproduces_regular_polygon():
    # the symmetric configuration itself, independent of the solver
    for n in range(3, 9):
        cfg = equispaced_config(np.full(n, (n - 2) / n))
        images = psi(cfg, cfg.prevertices)
        poly = regular_polygon(n)
        # align by the similarity fixing the first two vertices
        a = (poly.vertices[1] - poly.vertices[0]) / (images[1] - images[0])
        mapped = poly.vertices[0] + a * (images - images[0])
        assert np.max(np.abs(mapped - poly.vertices)) <= 1e-12


def test_triangle_needs_no_gap_equations():
    tri = Polygon([0, 2, 0.5 + 1j])
    cfg = solve_parameter_problem(tri)
    m = ConformalMap(tri, cfg)
    assert m.vertex_residual() <= 1e-12 * tri.diameter


@pytest.mark.parametrize("fixture", ["square_map", "lshape_map", "heptagon_map"])
def test_vertex_interpolation(fixture, request):
    m = request.getfixturevalue(fixture)
    assert np.max(np.abs(psi(m.config, m.config.prevertices) - m.polygon.vertices)) <= 1e-10 * m.polygon.diameter


def test_config_json_roundtrip_is_bitwise(lshape_map):
    doc = json.loads(json.dumps(lshape_map.config.to_json()))
    again = PrevertexConfig.from_json(doc)
    assert np.array_equal(again.args, lshape_map.config.args)
    assert again.A == lshape_map.config.A and again.B == lshape_map.config.B


@pytest.mark.parametrize("fixture", ["square_map", "lshape_map", "heptagon_map", "corner18"])
def test_psi_prime_corner_power_law(fixture, request):
    # log|psi'(r z_m)| = (alpha_m - 1) log(1 - r) + c0 + c1 (1 - r) + O((1 - r)^2); the
    # linear term comes from the other factors, which are smooth at z_m
    m = request.getfixturevalue(fixture)
    cfg = m.config
    k = int(np.argmax(cfg.alphas))
    zk = cfg.prevertices[k]
    r = np.array([0.9, 0.99, 0.999])
    x = 1 - r
    design = np.column_stack([np.log(x), np.ones(3), x])
    slope = np.linalg.solve(design, np.log(np.abs(psi_prime(cfg, r * zk))))[0]
    assert slope == pytest.approx(cfg.alphas[k] - 1, abs=0.02)


def test_psi_prime_finite_difference(heptagon_map, rng):
    cfg = heptagon_map.config
    z = 0.9 * np.sqrt(rng.uniform(0, 1, 40)) * np.exp(2j * np.pi * rng.uniform(0, 1, 40))
    h = 1e-5
    fd = (psi(cfg, z + h) - psi(cfg, z - h)) / (2 * h)
    assert np.max(np.abs(fd - psi_prime(cfg, z)) / np.abs(psi_prime(cfg, z))) <= 1e-6


def test_psi_rejects_exterior_points(square_map):
    with pytest.raises(DomainError):
        psi(square_map.config, 1.1)


def test_phi_rejects_exterior_points(lshape_map):
    with pytest.raises(DomainError):
        lshape_map.phi(1.5 + 1.5j)


def test_phi_near_corners(lshape_map):
    w = lshape_map.polygon.vertices
    inward = 0.5 + 0.5j - w
    pts = w + 1e-6 * inward / np.abs(inward)
    back = psi(lshape_map.config, lshape_map.phi(pts))
    assert np.max(np.abs(back - pts)) <= 1e-8 * lshape_map.polygon.diameter


def test_phi_of_center_point(square_map):
    # the square is symmetric about its center, which maps to psi(0) = B
    assert abs(square_map.phi(square_map.config.B)) <= 1e-12


def test_boundary_correspondence_is_monotone(lshape_map):
    # a curve just inside the boundary, traced counterclockwise, maps to increasing arguments
    poly = lshape_map.polygon
    a, b = poly.edges
    t = np.linspace(0.05, 0.95, 20)
    trace = []
    for p, q in zip(a, b):
        edge = p + (q - p) * t
        normal = 1j * (q - p) / abs(q - p)
        trace.append(edge + 1e-3 * normal)
    zeta = lshape_map.phi(np.concatenate(trace))
    steps = np.angle(np.roll(zeta, -1) / zeta)
    assert np.all(steps > 0)


def test_cauchy_riemann_partials(lshape_map, rng):
    pts = sample_interior(lshape_map.polygon, 30, rng)
    pts = pts[dist_to_boundary(pts, lshape_map.polygon) > 0.05]
    h = 1e-5
    d1, d2, _ = lshape_map.phi_derivatives(pts)
    dx = (np.conj(lshape_map.phi_prime(pts + h)) - np.conj(lshape_map.phi_prime(pts - h))) / (2 * h)
    dy = (np.conj(lshape_map.phi_prime(pts + 1j * h)) - np.conj(lshape_map.phi_prime(pts - 1j * h))) / (2 * h)
    scale = np.abs(d2)
    assert np.max(np.abs(dx - np.conj(d2)) / scale) <= 1e-5
    assert np.max(np.abs(dy + 1j * np.conj(d2)) / scale) <= 1e-5


def test_inverse_derivative_identity(heptagon_map, rng):
    pts = sample_interior(heptagon_map.polygon, 200, rng)
    zeta = heptagon_map.phi(pts)
    d1 = heptagon_map.phi_prime(pts, zeta)
    assert np.max(np.abs(d1 * psi_prime(heptagon_map.config, zeta) - 1)) <= 1e-13


def test_koebe_mid_edge_approach(lshape_map):
    # approaching the middle of an edge the ratio stays well inside the band
    mid = 1.0 + 0j
    pts = mid + 1j * np.logspace(-1, -7, 7)
    k = koebe_ratio(lshape_map, pts)
    assert np.all(k >= 0.25) and np.all(k <= 1.0)
    assert k[-1] == pytest.approx(0.5, abs=1e-3)


def test_kernel_bound_constants_stable(square_map, square):
    lo = whitney_kernel_bounds(square_map, whitney_decompose(square, 5))
    hi = whitney_kernel_bounds(square_map, whitney_decompose(square, 6))
    for key in ("second", "third", "kernel"):
        assert np.isfinite(hi[key])
        assert hi[key] == pytest.approx(lo[key], rel=0.10)
    lower = 1 / (4 * math.sqrt(2)) * 10 / 11
    assert lo["rho_over_dist_min"] >= lower * 0.99
    assert lo["rho_over_dist_max"] <= 20 / (19 * math.sqrt(2)) * 1.01


def test_kernel_bound_lshape_finite(lshape_map, lshape):
    out = whitney_kernel_bounds(lshape_map, whitney_decompose(lshape, 5))
    assert all(np.isfinite(out[k]) for k in ("second", "third", "kernel"))


def test_corner_domain_shape():
    m = corner_domain(1.8)
    assert m.polygon.alpha_max == pytest.approx(1.8, abs=1e-10)
    assert m.polygon.max_vertex == 0
    assert m.vertex_residual() <= 1e-10


def test_map_from_config_rejects_nonsimple():
    with pytest.raises(ValueError):
        equispaced_config([1.5, 0.5, 0.5])


def test_inverse_map_error_is_numerical():
    assert issubclass(InverseMapError, RuntimeError)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 0.97), st.floats(0, 2 * math.pi))
def test_roundtrip_property(r, t):
    m = _HEPT_MAP.get()
    z = r * np.exp(1j * t)
    assert abs(m.phi(psi(m.config, z)) - z) <= 1e-9


class _Lazy:
    def __init__(self, build):
        self.build, self.value = build, None

    def get(self):
        if self.value is None:
            self.value = self.build()
        return self.value


_HEPT_MAP = _Lazy(lambda: map_from_config(corner_domain(1.7).config))


def test_phi_derivatives_match_finite_differences(lshape_map, rng):
    pts = sample_interior(lshape_map.polygon, 60, rng)
    pts = pts[dist_to_boundary(pts, lshape_map.polygon) > 0.05]
    h = 1e-4
    d1, d2, d3 = phi_derivatives_at(lshape_map.config, lshape_map.phi(pts))
    fd2 = (lshape_map.phi_prime(pts + h) - lshape_map.phi_prime(pts - h)) / (2 * h)
    fd3 = (lshape_map.phi_prime(pts + h) - 2 * d1 + lshape_map.phi_prime(pts - h)) / h**2
    assert np.max(np.abs(fd2 - d2) / np.abs(d2)) <= 1e-4
    assert np.max(np.abs(fd3 - d3) / np.abs(d3)) <= 1e-4
