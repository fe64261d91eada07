"""Quadrature primitives.

All area integrals are taken against the normalized measure
``dA = dx dy / pi`` so that the unit disk has measure one.  Callers never
apply the ``1/pi`` themselves.  The one exception is :func:`box_integral`,
which returns the plain planar integral ``dx dy`` used for symbol averages.

Summation uses ``numpy.sum`` over contiguous arrays (pairwise summation), so
results are reproducible for a fixed node layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .geometry import Square


class QuadratureError(RuntimeError):
    """Refinement cap reached before the requested tolerance."""

    def __init__(self, message: str, estimate=None, residual: float | None = None):
        super().__init__(message)
        self.estimate = estimate
        self.residual = residual


@dataclass(frozen=True)
class QuadratureSpec:
    base_nodes: int = 16
    max_refinements: int = 12
    abs_tol: float = 1e-13
    rel_tol: float = 1e-10

    def __post_init__(self):
        if self.base_nodes < 4:
            raise ValueError("base_nodes must be >= 4")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")

    @classmethod
    def from_config(cls, doc: dict | None) -> "QuadratureSpec":
        doc = dict(doc or {})
        if "quadrature" in doc:
            doc = doc["quadrature"]
        return cls(**{k: doc[k] for k in ("base_nodes", "max_refinements", "abs_tol", "rel_tol") if k in doc})

    def converged(self, a, b) -> bool:
        return abs(a - b) <= max(self.abs_tol, self.rel_tol * abs(b))


DEFAULT_SPEC = QuadratureSpec()
# geometric panels below ~2**-44 of the radius lose resolution in double precision
_MAX_GRADING = 44


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def gauss_jacobi(n: int, alpha: float, beta: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for ``int_{-1}^{1} g(t) (1-t)^alpha (1+t)^beta dt``."""
    x, w = roots_jacobi(n, alpha, beta)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panel_nodes(breaks: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on consecutive panels."""
    x, w = gauss_legendre(n)
    a, b = breaks[:-1, None], breaks[1:, None]
    half = (b - a) / 2
    return ((a + b) / 2 + half * x).ravel(), (half * w).ravel()


def _tensor_rect(f, x0, x1, y0, y1, n):
    x, w = gauss_legendre(n)
    hx, hy = (x1 - x0) / 2, (y1 - y0) / 2
    xs = (x0 + x1) / 2 + hx * x
    ys = (y0 + y1) / 2 + hy * x
    pts = xs[:, None] + 1j * ys[None, :]
    vals = np.asarray(f(pts))
    return np.sum(vals * (w[:, None] * w[None, :])) * hx * hy


def box_integral(f: Callable, x0: float, x1: float, y0: float, y1: float, n: int = 12):
    """Planar ``int_{y0}^{y1} int_{x0}^{x1} f dx dy`` by a tensor Gauss rule (no 1/pi)."""
    if x1 == x0 or y1 == y0:
        return 0.0
    return _tensor_rect(f, x0, x1, y0, y1, n)


def integrate_square(f: Callable, square: Square, spec: QuadratureSpec = DEFAULT_SPEC):
    """``int_S f dA`` with adaptive quadrisection until the tolerances of ``spec`` are met."""
    u, v, rho = square.anchor.real, square.anchor.imag, square.side
    n = spec.base_nodes

    def rec(x0, y0, h, whole, depth):
        hh = h / 2
        parts = [_tensor_rect(f, x, x + hh, y, y + hh, n)
                 for x, y in ((x0, y0), (x0 + hh, y0), (x0, y0 + hh), (x0 + hh, y0 + hh))]
        total = parts[0] + parts[1] + parts[2] + parts[3]
        if spec.converged(whole, total):
            return total
        if depth >= spec.max_refinements:
            raise QuadratureError(f"square quadrature stalled at depth {depth}", total, abs(total - whole))
        return sum(rec(x, y, hh, p, depth + 1)
                   for (x, y), p in zip(((x0, y0), (x0 + hh, y0), (x0, y0 + hh), (x0 + hh, y0 + hh)), parts))

    whole = _tensor_rect(f, u, u + rho, v, v + rho, n)
    return rec(u, v, rho, whole, 0) / math.pi


def square_rule(square: Square, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss nodes in a square with weights for ``dA``."""
    x, w = gauss_legendre(n)
    h = square.side / 2
    c = square.center
    pts = (c.real + h * x)[:, None] + 1j * (c.imag + h * x)[None, :]
    wts = (w[:, None] * w[None, :]) * h * h / math.pi
    return pts.ravel(), wts.ravel()


def graded_breaks(a: float, b: float, depth: int, toward: str = "b", ratio: float = 0.5) -> np.ndarray:
    """Panel breakpoints on ``[a, b]`` shrinking geometrically toward one end."""
    k = np.arange(depth + 1)
    if toward == "b":
        pts = b - (b - a) * ratio**k
        return np.concatenate([pts, [b]])
    pts = a + (b - a) * ratio**k
    return np.concatenate([[a], pts[::-1]])


def angular_rule(singular_angles: Sequence[float], depth: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite rule on ``[0, 2 pi)`` graded geometrically toward given angles."""
    if not len(singular_angles):
        m = max(4 * n, 64)
        th = 2 * np.pi * np.arange(m) / m
        return th, np.full(m, 2 * np.pi / m)
    s = np.sort(np.mod(np.asarray(singular_angles, dtype=float), 2 * np.pi))
    s = np.unique(s)
    nodes, weights = [], []
    for i, a in enumerate(s):
        b = s[(i + 1) % s.size] + (2 * np.pi if i + 1 == s.size else 0.0)
        gap = b - a
        if gap <= 0:
            continue
        mid = a + gap / 2
        left = graded_breaks(a, mid, depth, toward="a")
        right = graded_breaks(mid, b, depth, toward="b")
        breaks = np.concatenate([left, right[1:]])
        x, w = panel_nodes(np.unique(breaks), n)
        nodes.append(x)
        weights.append(w)
    th = np.concatenate(nodes)
    return np.mod(th, 2 * np.pi), np.concatenate(weights)


def disk_rule(radius: float = 1.0, spec: QuadratureSpec = DEFAULT_SPEC, radial_depth: int = 24,
              singular_angles: Sequence[float] = (), angular_depth: int | None = None):
    """Product polar rule on ``|w| < radius``; weights include ``r dr dtheta / pi``."""
    n = spec.base_nodes
    rb = graded_breaks(0.0, radius, radial_depth, toward="b")
    r, wr = panel_nodes(rb, n)
    th, wt = angular_rule(singular_angles, radial_depth if angular_depth is None else angular_depth, n)
    pts = r[:, None] * np.exp(1j * th)[None, :]
    wts = (wr * r)[:, None] * wt[None, :] / math.pi
    return pts.ravel(), wts.ravel()


def integrate_disk(f: Callable, radius: float = 1.0, spec: QuadratureSpec = DEFAULT_SPEC,
                   singular_angles: Sequence[float] = (), radial_depth: int = 12):
    """``int_{|w|<radius} f dA`` by a polar product rule.

    The radial mesh is graded with ratio 1/2 toward ``radius``; when
    ``singular_angles`` are given the angular mesh is graded toward them too.
    The grading depth is increased until two successive results agree.
    """
    if radius <= 0:
        return 0.0
    prev = None
    depth = radial_depth
    for _ in range(spec.max_refinements):
        if depth > _MAX_GRADING:
            break
        pts, wts = disk_rule(radius, spec, depth, singular_angles)
        val = np.sum(np.asarray(f(pts)) * wts)
        if prev is not None and spec.converged(prev, val):
            return val
        prev = val
        depth += 6
    raise QuadratureError("disk quadrature did not settle", prev)


def integrate_segment_jacobi(g: Callable, beta: float, a: complex, b: complex, n: int = 20):
    """``int_a^b g(x) |x - b|^beta dx`` along the straight segment, Gauss-Jacobi at ``b``."""
    if beta <= -1:
        raise ValueError("endpoint exponent must exceed -1")
    x, w = gauss_jacobi(n, float(beta), 0.0)
    d = b - a
    pts = a + d * (1 + x) / 2
    scale = d / 2 * (abs(d) / 2) ** beta
    return np.sum(np.asarray(g(pts)) * w) * scale


def trapezoid_circle(f: Callable, m: int):
    th = 2 * np.pi * np.arange(m) / m
    return np.mean(np.asarray(f(th)))


def integrate_circle(f: Callable, spec: QuadratureSpec = DEFAULT_SPEC, start: int = 64):
    """``(1/2pi) int_0^{2pi} f(theta) dtheta`` by the trapezoid rule, doubling nodes."""
    m = start
    prev = trapezoid_circle(f, m)
    for _ in range(spec.max_refinements):
        m *= 2
        val = trapezoid_circle(f, m)
        if spec.converged(prev, val):
            return val
        prev = val
    raise QuadratureError("circle quadrature did not settle", prev)


def _segment_point_distance(s, e, points) -> np.ndarray:
    d = e - s
    dd = np.abs(d) ** 2
    safe = np.where(dd > 0, dd, 1.0)[:, None]
    t = ((points[None, :] - s[:, None]) * np.conj(d)[:, None]).real / safe
    t = np.clip(np.where(dd[:, None] > 0, t, 0.0), 0.0, 1.0)
    return np.abs(points[None, :] - (s[:, None] + t * d[:, None])).min(axis=1)


def compound_segment_integral(g: Callable, a, b, singular_points, n: int = 16, max_depth: int = 64) -> np.ndarray:
    """``int_a^b g(zeta) dzeta`` along straight segments, vectorized over ``a`` and ``b``.

    Each segment is bisected until every piece is no longer than its
    distance to the nearest point of ``singular_points``; the pieces get an
    ``n``-point Gauss-Legendre rule.  Endpoints must not be singular points.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
    shape = a.shape
    if a.size == 0:
        return np.zeros(shape, dtype=complex)
    sing = np.asarray(singular_points, dtype=complex).ravel()
    s, e = a.ravel().copy(), b.ravel().copy()
    owner = np.arange(s.size)
    keep_s, keep_e, keep_o = [], [], []
    for _ in range(max_depth):
        if s.size == 0:
            break
        ok = np.abs(e - s) <= _segment_point_distance(s, e, sing) if sing.size else np.ones(s.size, dtype=bool)
        keep_s.append(s[ok])
        keep_e.append(e[ok])
        keep_o.append(owner[ok])
        s, e, owner = s[~ok], e[~ok], owner[~ok]
        if s.size == 0:
            break
        m = (s + e) / 2
        s, e, owner = np.concatenate([s, m]), np.concatenate([m, e]), np.concatenate([owner, owner])
    if s.size:
        raise QuadratureError("segment runs into a singular point", None, None)
    s, e, owner = np.concatenate(keep_s), np.concatenate(keep_e), np.concatenate(keep_o)
    x, w = gauss_legendre(n)
    half = (e - s) / 2
    pts = (s + e)[:, None] / 2 + half[:, None] * x[None, :]
    seg = (np.asarray(g(pts)) @ w) * half
    out = np.zeros(a.size, dtype=complex)
    np.add.at(out, owner, seg)
    return out.reshape(shape)
