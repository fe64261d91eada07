"""Toeplitz operators on polygonal domains.

Symbols, the box-average condition on Whitney-type squares, partial-sum
(square by square) and classical Toeplitz operators, the integration by
parts split of a single square contribution, norm-ratio tables over test
families, divergence probes, and the worked disk examples.

Per-square contributions follow the level-major order of the Whitney
decomposition, which makes partial sums reproducible.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .bergman import (ONE_MINUS_ABS2, DiskPolynomial, WhitneyQuadrature, disk_project, kernel_from_data,
                      richardson)
from .geometry import (SQRT2, Polygon, Square, WhitneyDecomposition, contains, dist_to_boundary,
                       square_boundary_distance, whitney_decompose)
from .quadrature import (DEFAULT_SPEC, QuadratureError, QuadratureSpec, angular_rule, compound_segment_integral,
                         gauss_legendre, graded_breaks, integrate_circle, integrate_disk, panel_nodes)
from .scmap import ConformalMap, PrevertexConfig, phi_derivatives_at

GROWTH_FAIL = 1.5
GROWTH_RUN = 3
DIVERGENCE_MARGIN = 0.05


# -- symbols ------------------------------------------------------------------------------


@dataclass(frozen=True)
class Symbol:
    """A symbol ``a`` on the domain.

    ``evaluator`` takes complex points.  ``box_integral(x0, x1, y0, y1)``,
    when given, is the planar integral over the box in closed form.
    ``map_form(zeta, d1)`` evaluates the symbol from ``phi`` and ``phi'``
    and is used on quadrature nodes where those are already known.
    """

    evaluator: Callable
    box_integral: Callable | None = None
    tag: str = "custom"
    params: dict = field(default_factory=dict)
    map_form: Callable | None = None

    def __call__(self, w):
        return np.asarray(self.evaluator(np.asarray(w, dtype=complex)))

    def values(self, quad: WhitneyQuadrature) -> np.ndarray:
        if self.map_form is not None:
            return np.asarray(self.map_form(quad.zeta, quad.d1))
        return self(quad.points)

    def scaled(self, c: complex) -> "Symbol":
        box = None if self.box_integral is None else (lambda *b: c * self.box_integral(*b))
        mf = None if self.map_form is None else (lambda z, d: c * self.map_form(z, d))
        return Symbol(lambda w: c * self.evaluator(w), box, f"{c}*{self.tag}", dict(self.params), mf)


def constant_symbol(c: complex = 1.0) -> Symbol:
    return Symbol(lambda w: np.full(np.shape(w), c, dtype=complex),
                  lambda x0, x1, y0, y1: c * (x1 - x0) * (y1 - y0), "constant", {"c": c},
                  lambda z, d: np.full(np.shape(z), c, dtype=complex))


def linear_symbol(b0: float = 0.0, bx: float = 1.0, by: float = 1.0) -> Symbol:
    """``a(x + iy) = b0 + bx x + by y``."""

    def box(x0, x1, y0, y1):
        wx, wy = x1 - x0, y1 - y0
        return b0 * wx * wy + bx * (x1**2 - x0**2) / 2 * wy + by * (y1**2 - y0**2) / 2 * wx

    return Symbol(lambda w: b0 + bx * w.real + by * w.imag + 0j, box, "linear", {"b0": b0, "bx": bx, "by": by})


def exp_cos_symbol() -> Symbol:
    """``a(x + iy) = e^x cos y``."""

    def box(x0, x1, y0, y1):
        return (np.exp(x1) - np.exp(x0)) * (np.sin(y1) - np.sin(y0))

    return Symbol(lambda w: np.exp(w.real) * np.cos(w.imag) + 0j, box, "exp_cos")


def inv_boundary_dist_symbol(polygon: Polygon) -> Symbol:
    return Symbol(lambda w: 1.0 / dist_to_boundary(w, polygon) + 0j, None, "inv_boundary_dist")


def corner_power_symbol(cmap: ConformalMap, vertex: int, t: float) -> Symbol:
    """``a = (1 - conj(z_m) phi)**t`` for the prevertex ``z_m`` of ``vertex``."""
    c = np.conj(cmap.prevertices[vertex])

    def map_form(zeta, d1):
        return (1 - c * zeta) ** t

    return Symbol(lambda w: map_form(cmap.phi(w), None), None, "corner_power", {"vertex": vertex, "t": t}, map_form)


def log_phi_prime(config: PrevertexConfig, zeta) -> np.ndarray:
    """Continuous branch of ``log phi'`` from the product formula."""
    zeta = np.asarray(zeta, dtype=complex)
    logs = np.log(1.0 - zeta[..., None] * np.conj(config.prevertices))
    return logs @ (1 - config.alphas) - np.log(config.A)


def closed_form_symbol(cmap: ConformalMap, p: float) -> Symbol:
    """``a = phi'^(1-2/p) (1 - |phi|^2)(1 + |phi|^2 - 2 phi)``."""

    def map_form(zeta, d1):
        r2 = np.abs(zeta) ** 2
        return np.exp((1 - 2 / p) * log_phi_prime(cmap.config, zeta)) * (1 - r2) * (1 + r2 - 2 * zeta)

    return Symbol(lambda w: map_form(cmap.phi(w), None), None, "example_53", {"p": p}, map_form)


def theta_symbol(cmap: ConformalMap, p: float, m: int) -> Symbol:
    """``a = phi'^(1-2/p) (1 - |phi|^2)(phi/|phi| - |phi|)^m``."""

    def map_form(zeta, d1):
        r = np.abs(zeta)
        unit = np.where(r > 0, zeta / np.where(r > 0, r, 1.0), 1.0)
        return np.exp((1 - 2 / p) * log_phi_prime(cmap.config, zeta)) * (1 - r**2) * (unit - r) ** m

    return Symbol(lambda w: map_form(cmap.phi(w), None), None, "example_54", {"p": p, "m": m}, map_form)


def symbol_from_config(doc: dict, polygon: Polygon, cmap: ConformalMap | None = None) -> Symbol:
    """Build a symbol from ``{"kind": ..., "params": {...}}``."""
    kind = doc.get("kind")
    params = dict(doc.get("params", {}))
    if kind == "constant":
        c = params.get("c", 1.0)
        return constant_symbol(complex(*c) if isinstance(c, (list, tuple)) else c)
    if kind == "linear":
        return linear_symbol(**params)
    if kind == "inv_boundary_dist":
        return inv_boundary_dist_symbol(polygon)
    if cmap is None:
        raise ValueError(f"symbol kind {kind!r} needs a conformal map")
    if kind == "corner_power":
        return corner_power_symbol(cmap, int(params.get("vertex", polygon.max_vertex)), float(params["t"]))
    if kind == "example_53":
        return closed_form_symbol(cmap, float(params["p"]))
    if kind == "example_54":
        return theta_symbol(cmap, float(params["p"]), int(params.get("m", 2)))
    raise ValueError(f"unknown symbol kind {kind!r}")


# -- box averages ---------------------------------------------------------------------------


def _box_integrals(a: Symbol, x0, x1, y0, y1, n: int = 10) -> np.ndarray:
    """Planar integrals of ``a`` over many boxes (vectorized tensor Gauss)."""
    x0, x1, y0, y1 = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (x0, x1, y0, y1))
    if a.box_integral is not None:
        return np.asarray(a.box_integral(x0, x1, y0, y1), dtype=complex)
    x, w = gauss_legendre(n)
    out = np.empty(x0.size, dtype=complex)
    for s in range(0, x0.size, max(1, 20000 // (n * n))):
        sl = slice(s, s + max(1, 20000 // (n * n)))
        hx, hy = (x1[sl] - x0[sl]) / 2, (y1[sl] - y0[sl]) / 2
        xs = (x0[sl] + x1[sl])[:, None] / 2 + hx[:, None] * x[None, :]
        ys = (y0[sl] + y1[sl])[:, None] / 2 + hy[:, None] * x[None, :]
        pts = xs[:, :, None] + 1j * ys[:, None, :]
        vals = a(pts)
        out[sl] = np.einsum("bij,i,j->b", vals, w, w) * hx * hy
    return out


def hat_average(a: Symbol, square: Square, zp: complex, n: int = 12) -> complex:
    """``(1/rho^2) int_v^{y'} int_u^{x'} a dx dy`` for ``z' = x' + i y'`` in the square."""
    u, v, rho = square.anchor.real, square.anchor.imag, square.side
    zp = complex(zp)
    tol = 1e-12 * rho
    if not (u - tol <= zp.real <= u + rho + tol and v - tol <= zp.imag <= v + rho + tol):
        raise ValueError("z' must lie in the closed square")
    return complex(_box_integrals(a, u, zp.real, v, zp.imag, n)[0]) / rho**2


@dataclass
class SymbolConditionReport:
    sup_average: float
    level_maxima: dict
    growth_factors: dict
    sample_count: int
    passed: bool
    growth_threshold: float = GROWTH_FAIL
    t: float | None = None
    vertex: int | None = None
    tag: str = ""

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_json(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict
        d["level_maxima"] = {str(k): v for k, v in self.level_maxima.items()}
        d["growth_factors"] = {str(k): v for k, v in self.growth_factors.items()}
        return d


def admissible_band(anchors, sides, polygon: Polygon) -> np.ndarray:
    """Squares inside the polygon with ``sqrt2 rho <= dist(S, boundary) <= 4 sqrt2 rho``."""
    d = square_boundary_distance(anchors, sides, polygon)
    centers = anchors + (1 + 1j) * sides / 2
    inside = np.atleast_1d(contains(polygon, centers))
    lo = SQRT2 * sides * (1 - 1e-12)
    hi = 4 * SQRT2 * sides * (1 + 1e-12)
    return inside & (d >= lo) & (d <= hi)


def _growth_verdict(level_max: dict) -> tuple[dict, bool]:
    levels = sorted(level_max)
    growth = {}
    for a, b in zip(levels[:-1], levels[1:]):
        prev = level_max[a]
        growth[b] = level_max[b] / prev if prev > 0 else (math.inf if level_max[b] > 0 else 1.0)
    run, failed = 0, False
    for lvl in levels[1:]:
        run = run + 1 if growth[lvl] >= GROWTH_FAIL else 0
        failed |= run >= GROWTH_RUN
    return growth, not failed


def check_symbol_condition(a: Symbol, polygon: Polygon, max_level: int, samples_per_square: int = 3,
                           translates: int = 8, seed: int = 0, nodes: int = 10,
                           decomposition: WhitneyDecomposition | None = None, weight: Callable | None = None,
                           min_level: int | None = None) -> SymbolConditionReport:
    """Sampled sup of ``|a_hat_S(z')|`` over admissible squares, per level.

    Squares are the Whitney squares plus ``translates`` jittered copies of
    each, kept when they lie in the admissible distance band.  ``z'`` runs
    over a ``k x k`` grid in each square whose last node is the upper right
    corner.  ``weight(z')``, if given, divides each average.  The verdict
    is FAIL when level maxima grow by at least 1.5 per level over three
    consecutive levels.
    """
    dec = decomposition if decomposition is not None else whitney_decompose(polygon, max_level)
    anchors, sides = dec.anchors, dec.sides
    levels = np.asarray(dec.levels)
    if min_level is not None:
        keep = levels >= min_level
        anchors, sides, levels = anchors[keep], sides[keep], levels[keep]
    rng = np.random.default_rng(seed)
    if translates:
        jit = rng.uniform(-0.5, 0.5, (anchors.size, translates, 2))
        cand = anchors[:, None] + sides[:, None] * (jit[..., 0] + 1j * jit[..., 1])
        cand_sides = np.repeat(sides[:, None], translates, axis=1).ravel()
        cand_levels = np.repeat(levels[:, None], translates, axis=1).ravel()
        cand = cand.ravel()
        ok = admissible_band(cand, cand_sides, polygon)
        anchors = np.concatenate([anchors, cand[ok]])
        sides = np.concatenate([sides, cand_sides[ok]])
        levels = np.concatenate([levels, cand_levels[ok]])
    k = samples_per_square
    t = (np.arange(k) + 1.0) / k
    rel = (t[:, None] + 1j * t[None, :]).ravel()
    zp = (anchors[:, None] + sides[:, None] * rel[None, :]).ravel()
    x0 = np.repeat(anchors.real, rel.size)
    y0 = np.repeat(anchors.imag, rel.size)
    rho = np.repeat(sides, rel.size)
    avg = np.abs(_box_integrals(a, x0, zp.real, y0, zp.imag, nodes)) / rho**2
    if weight is not None:
        avg = avg / np.asarray(weight(zp))
    lv = np.repeat(levels, rel.size)
    level_max = {int(l): float(avg[lv == l].max()) for l in np.unique(lv)}
    growth, passed = _growth_verdict(level_max)
    return SymbolConditionReport(float(avg.max()), level_max, growth, int(anchors.size), passed, tag=a.tag)


def check_symbol_condition_weighted(a: Symbol, cmap: ConformalMap, t: float, vertex: int, max_level: int,
                                    **kwargs) -> SymbolConditionReport:
    """As :func:`check_symbol_condition`, dividing by ``|1 - phi(z') conj(z_m)|**t``."""
    if t <= 0:
        raise ValueError("weighted condition needs t > 0")
    c = np.conj(cmap.prevertices[vertex])

    def weight(zp):
        return np.abs(1 - cmap.phi(zp) * c) ** t

    rep = check_symbol_condition(a, cmap.polygon, max_level, weight=weight, **kwargs)
    rep.t, rep.vertex = t, vertex
    return rep


# -- analytic test functions --------------------------------------------------------------


@dataclass(frozen=True)
class AnalyticFunction:
    value: Callable
    first: Callable
    second: Callable
    tag: str = ""

    def __call__(self, w):
        return self.value(np.asarray(w, dtype=complex))


def polynomial_function(coefficients: Sequence[complex]) -> AnalyticFunction:
    """``sum c_k w^k`` with its first two derivatives."""
    c = np.polynomial.Polynomial(np.asarray(coefficients, dtype=complex))
    d1, d2 = c.deriv(1), c.deriv(2)
    return AnalyticFunction(lambda w: c(w) + 0j, lambda w: d1(w) + 0j, lambda w: d2(w) + 0j,
                            f"poly{list(coefficients)}")


def _values(f, quad: WhitneyQuadrature) -> np.ndarray:
    if hasattr(f, "value") and not isinstance(f, AnalyticFunction):
        d2 = quad.derivatives[1]
        return f.value(quad.zeta, quad.d1, d2)
    return np.asarray(f(quad.points), dtype=complex)


# -- partial sums and the generalized operator --------------------------------------------


def square_contributions(a: Symbol, f, quad: WhitneyQuadrature, z) -> np.ndarray:
    """``F_n f(z) = int_{S_n} K(z, w) a(w) f(w) dA(w)`` for all squares, shape ``(len(z), N)``."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    af = a.values(quad) * _values(f, quad)
    return quad.square_sums(quad.kernel_at(z) * af[None, :])


def apply_partial(a: Symbol, f, quad: WhitneyQuadrature, m: int, z):
    """``T^(m) f(z)``: sum of the first ``m`` square contributions."""
    F = square_contributions(a, f, quad, z)
    if not 0 <= m <= F.shape[1]:
        raise ValueError(f"m must lie in [0, {F.shape[1]}]")
    out = F[:, :m].sum(axis=1)
    return out if np.ndim(z) else complex(out[0])


@dataclass
class ToeplitzApplication:
    z: np.ndarray
    levels: list
    checkpoints: list
    partial: np.ndarray
    increments: np.ndarray
    absolute_sum: np.ndarray
    status: str
    value: np.ndarray | None
    extrapolated: np.ndarray | None

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_json(self) -> dict:
        def cx(a):
            return None if a is None else [[float(v.real), float(v.imag)] for v in np.ravel(a)]

        return {
            "z": cx(self.z), "levels": list(map(int, self.levels)), "checkpoints": list(map(int, self.checkpoints)),
            "partial": [cx(row) for row in self.partial], "status": self.status, "value": cx(self.value),
            "extrapolated": cx(self.extrapolated), "absolute_sum": [float(v) for v in self.absolute_sum],
        }


def apply_generalized(a: Symbol, f, quad: WhitneyQuadrature, z, tol: float = 1e-8,
                      extrapolation_order: int = 2) -> ToeplitzApplication:
    """``T^(m) f(z)`` at the level checkpoints, with a convergence verdict.

    Converged when three consecutive checkpoint increments are below ``tol``;
    otherwise the status is ``"no convergence"``.  The Richardson estimate
    in the truncation level is reported in either case.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    F = square_contributions(a, f, quad, z)
    levels = np.asarray(quad.decomposition.levels)
    lv = sorted(np.unique(levels).tolist())
    ends = [int(np.searchsorted(levels, l, side="right")) for l in lv]
    csum = np.cumsum(F, axis=1)
    partial = np.array([csum[:, e - 1] for e in ends])
    increments = np.diff(np.vstack([np.zeros_like(partial[:1]), partial]), axis=0)
    small = np.all(np.abs(increments) < tol, axis=1)
    converged = len(small) >= 3 and bool(small[-3:].all())
    order = min(extrapolation_order, len(lv) - 1)
    extrap = richardson(list(partial), order) if order >= 1 else partial[-1]
    return ToeplitzApplication(z, lv, ends, partial, increments, np.abs(F).sum(axis=1),
                               "converged" if converged else "no convergence",
                               partial[-1] if converged else None, extrap)


def partial_sum_tails(a: Symbol, f, quad: WhitneyQuadrature, norm_quad: WhitneyQuadrature, p: float,
                      chunk: int = 256) -> dict:
    """``||T^(m) f - T^(M) f||_p`` at the level checkpoints ``m`` (``M`` = all squares).

    ``T^(m) f`` is evaluated at the nodes of ``norm_quad`` and the norm is
    the quadrature norm there.
    """
    levels = np.asarray(quad.decomposition.levels)
    lv = sorted(np.unique(levels).tolist())
    ends = [int(np.searchsorted(levels, l, side="right")) for l in lv]
    g = a.values(quad) * _values(f, quad)
    zeta_z, d1_z = norm_quad.zeta, norm_quad.d1
    partial = np.empty((len(ends), zeta_z.size), dtype=complex)
    for s in range(0, zeta_z.size, chunk):
        sl = slice(s, s + chunk)
        K = kernel_from_data(zeta_z[sl, None], d1_z[sl, None], quad.zeta[None, :], quad.d1[None, :])
        csum = np.cumsum(quad.square_sums(K * g[None, :]), axis=1)
        partial[:, sl] = csum[:, [e - 1 for e in ends]].T
    tails = [float(norm_quad.integrate(np.abs(row - partial[-1]) ** p) ** (1 / p)) for row in partial[:-1]]
    monotone = all(b < a_ for a_, b in zip(tails[:-1], tails[1:]))
    return {"levels": lv[:-1], "checkpoints": ends[:-1], "tails": tails, "monotone": bool(monotone)}


def apply_classical(a: Symbol, f, quad: WhitneyQuadrature, z, settle_ratio: float = 0.75) -> dict:
    """``int K(z, w) a f dA`` over the truncation, extrapolated one Richardson step in level.

    The absolute integrand is checked first: if its level increments fail
    to shrink the status is ``"divergent"``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    vals = quad.kernel_at(z) * (a.values(quad) * _values(f, quad))[None, :]
    by_level = quad.level_integrals(vals)
    abs_level = quad.level_integrals(np.abs(vals))
    seq = [by_level[l] for l in sorted(by_level)]
    aseq = [np.max(abs_level[l]) for l in sorted(abs_level)]
    inc = np.diff(aseq)
    status = "ok"
    if inc.size >= 3 and inc[-1] > settle_ratio * inc[-2] and inc[-2] > settle_ratio * inc[-3]:
        status = "divergent"
    value = richardson(seq, 1) if len(seq) >= 2 else seq[-1]
    return {"value": value, "truncated": seq[-1], "status": status, "absolute": aseq[-1]}


# -- integration by parts on one square ---------------------------------------------------


def f_decomposition_check(a: Symbol, f: AnalyticFunction, cmap: ConformalMap, square: Square, z: complex,
                          n: int = 14) -> dict:
    """Compare ``F_n`` with its integration by parts split on one square.

    With ``A(x, y)`` the planar integral of ``a`` over ``[u, x] x [v, y]`` and
    ``h(w) = f(w) K(z, w)``:

    * ``F1 = A(x1, y1) h(x1, y1)``
    * ``F2 = int A(x1, y) d_y h(x1, y) dy``
    * ``F3 = int A(x, y1) d_x h(x, y1) dx``
    * ``F4 = int int A d_x d_y h dx dy``

    and ``F_n = F1 - F2 - F3 + F4``; every term carries the ``1/pi`` of the
    area measure.  ``F_n`` itself is computed directly as ``int a h``.
    """
    u, v, rho = square.anchor.real, square.anchor.imag, square.side
    x1, y1 = u + rho, v + rho
    zeta_z = complex(cmap.phi(complex(z)))
    d1z = 1.0 / complex(cmap.psi_prime(zeta_z))
    c = np.conj(zeta_z)

    def hdata(w):
        zeta = np.asarray(cmap.phi(w))
        d1, d2, d3 = phi_derivatives_at(cmap.config, zeta)
        q = 1 - c * zeta
        g = d1 / q**2
        g1 = d2 / q**2 + 2 * c * d1**2 / q**3
        g2 = d3 / q**2 + 6 * c * d1 * d2 / q**3 + 6 * c**2 * d1**3 / q**4
        K = d1z * np.conj(g)
        fv, f1, f2 = f.value(w), f.first(w), f.second(w)
        h = fv * K
        hx = f1 * K + fv * d1z * np.conj(g1)
        hy = 1j * f1 * K - 1j * fv * d1z * np.conj(g1)
        hxy = 1j * d1z * (f2 * np.conj(g) - fv * np.conj(g2))
        return h, hx, hy, hxy

    x, w = gauss_legendre(n)
    xs = u + rho * (1 + x) / 2
    ys = v + rho * (1 + x) / 2
    wt = w * rho / 2
    grid = xs[:, None] + 1j * ys[None, :]
    h, _, _, hxy = hdata(grid.ravel())
    h, hxy = h.reshape(grid.shape), hxy.reshape(grid.shape)
    avals = a(grid)
    Fn = np.sum(avals * h * wt[:, None] * wt[None, :]) / math.pi

    def A(xe, ye):
        xe, ye = np.broadcast_arrays(np.asarray(xe, dtype=float), np.asarray(ye, dtype=float))
        flat = _box_integrals(a, np.full(xe.size, u), xe.ravel(), np.full(xe.size, v), ye.ravel(), n)
        return flat.reshape(xe.shape)

    corner = complex(x1, y1)
    hc = hdata(np.array([corner]))[0][0]
    F1 = A(x1, y1) * hc / math.pi
    right = x1 + 1j * ys
    top = xs + 1j * y1
    _, _, hy_r, _ = hdata(right)
    _, hx_t, _, _ = hdata(top)
    F2 = np.sum(A(np.full(n, x1), ys) * hy_r * wt) / math.pi
    F3 = np.sum(A(xs, np.full(n, y1)) * hx_t * wt) / math.pi
    Agrid = A(np.repeat(xs[:, None], n, axis=1), np.repeat(ys[None, :], n, axis=0))
    F4 = np.sum(Agrid * hxy * wt[:, None] * wt[None, :]) / math.pi
    split = F1 - F2 - F3 + F4
    residual = abs(Fn - split)
    return {"F": complex(Fn), "F1": complex(F1), "F2": complex(F2), "F3": complex(F3), "F4": complex(F4),
            "residual": float(residual), "relative": float(residual / (1 + abs(Fn)))}


# -- norm growth tables --------------------------------------------------------------------


@dataclass
class NormGrowthTable:
    rows: list
    sup_ratio: float
    growth: float
    bounded: bool
    growth_limit: float = 0.10

    def to_json(self) -> dict:
        return asdict(self)


def _table(rows: list, growth_limit: float) -> NormGrowthTable:
    ratios = [r["ratio"] for r in rows if np.isfinite(r["ratio"])]
    failed = any(r.get("status", "ok") != "ok" for r in rows)
    sup = max(ratios) if ratios else math.inf
    first = ratios[0] if ratios else math.nan
    growth = max(ratios) / first - 1 if ratios and first > 0 else (0.0 if ratios and max(ratios) == 0 else math.inf)
    bounded = not failed and bool(ratios) and growth <= growth_limit
    return NormGrowthTable(rows, float(sup), float(growth), bool(bounded), growth_limit)


def estimate_operator_norm(a: Symbol, quad: WhitneyQuadrature, p: float, family: Sequence,
                           norm_quad: WhitneyQuadrature, growth_limit: float = 0.10,
                           chunk: int = 256) -> NormGrowthTable:
    """``||T_a f||_p / ||f||_p`` over a test family, domain side.

    ``quad`` carries the inner (kernel) integral; ``T_a f`` is evaluated at
    the nodes of ``norm_quad`` where both norms are computed.  Family members
    are :class:`AnalyticFunction` objects or members of
    :func:`sctoeplitz.bergman.corner_power_family`.
    """
    avals = a.values(quad)
    zeta_z, d1_z = norm_quad.zeta, norm_quad.d1
    rows = []
    for member in family:
        fw = _values(member, quad)
        fz = _values(member, norm_quad)
        g = avals * fw
        Tf = np.empty(zeta_z.size, dtype=complex)
        for s in range(0, zeta_z.size, chunk):
            sl = slice(s, s + chunk)
            K = kernel_from_data(zeta_z[sl, None], d1_z[sl, None], quad.zeta[None, :], quad.d1[None, :])
            Tf[sl] = (K * g[None, :]) @ quad.weights
        nf = norm_quad.integrate(np.abs(fz) ** p) ** (1 / p)
        nT = norm_quad.integrate(np.abs(Tf) ** p) ** (1 / p)
        label = getattr(member, "label", getattr(member, "tag", ""))
        ok = np.isfinite(nT) and np.isfinite(nf) and nf > 0
        rows.append({"parameter": label, "norm_f": float(nf), "norm_Tf": float(nT),
                     "ratio": float(nT / nf) if ok else math.inf, "status": "ok" if ok else "divergent"})
    return _table(rows, growth_limit)


def weighted_disk_projection(g: Callable, z, singular_points) -> np.ndarray:
    """``P((1 - |w|^2) g)(z) = z^-2 int_0^z u g(u) du`` for analytic ``g``.

    Termwise: ``(1 - |w|^2) w^n`` projects to ``w^n / (n + 2)``.  At ``z = 0``
    the value is ``g(0) / 2``.
    """
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-8
    zz = np.where(small, 1e-8, z)
    val = compound_segment_integral(lambda u: u * g(u), np.zeros_like(zz), zz, singular_points) / zz**2
    return np.where(small, g(np.zeros_like(z)) / 2, val)


def _ray_weighted_projection(g: Callable, grid: np.ndarray, singular_points) -> np.ndarray:
    """Weighted projection ``z^-2 int_0^z u g(u) du`` on a polar grid ``grid[radius, angle]``.

    Radial nodes along one ray share the path from the origin, so the
    integral is accumulated between consecutive nodes.
    """
    starts = np.vstack([np.zeros((1, grid.shape[1]), dtype=complex), grid[:-1]])
    pieces = compound_segment_integral(lambda u: u * g(u), starts, grid, singular_points)
    return np.cumsum(pieces, axis=0) / grid**2


def disk_side_norm_ratio(config: PrevertexConfig, p: float, f_disk: Callable, symbol_factor: Callable,
                         weighted: bool, spec: QuadratureSpec | None = None, vertex: int | None = None,
                         depth: int = 18, max_depth: int = 42) -> dict:
    """``||T_a f||_p / ||f||_p`` computed on the disk after changing variables.

    ``f_disk = f o psi`` and ``a o psi = symbol_factor * (1 - |w|^2 if weighted
    else 1)`` with ``symbol_factor`` analytic.  Then ``F = f o psi * a o psi * psi'``
    and

    * ``||T_a f||^p = int |psi'(z)|^(2-p) |P F(z)|^p dA(z)``
    * ``||f||^p = int |f o psi|^p |psi'|^2 dA``.

    For analytic ``F`` (``weighted=False``) the projection reproduces ``F``;
    otherwise the weighted projection is a radial path integral.  Both
    integrals use a polar rule graded toward the unit circle and toward the
    prevertex angles, deepened by 6 until both norms settle.
    """
    from .scmap import psi_prime as _psi_prime

    spec = spec or QuadratureSpec(rel_tol=1e-7, abs_tol=1e-14)
    zk = config.prevertices
    angles = np.angle(zk) if vertex is None else [float(np.angle(zk[vertex]))]

    def g(w):
        return f_disk(w) * symbol_factor(w) * _psi_prime(config, w)

    prev = None
    d = depth
    while d <= max_depth:
        r, wr = panel_nodes(graded_breaks(0.0, 1.0, d, toward="b"), spec.base_nodes)
        th, wt = angular_rule(angles, d, spec.base_nodes)
        grid = r[:, None] * np.exp(1j * th)[None, :]
        wts = (wr * r)[:, None] * wt[None, :] / math.pi
        pf = _ray_weighted_projection(g, grid, zk) if weighted else g(grid)
        dpsi = np.abs(_psi_prime(config, grid))
        nT = float(np.sum(dpsi ** (2 - p) * np.abs(pf) ** p * wts)) ** (1 / p)
        nf = float(np.sum(np.abs(f_disk(grid)) ** p * dpsi**2 * wts)) ** (1 / p)
        if prev is not None and spec.converged(prev[0], nT) and spec.converged(prev[1], nf):
            return {"norm_Tf": nT, "norm_f": nf, "ratio": nT / nf, "depth": d}
        prev = (nT, nf)
        d += 6
    raise QuadratureError("disk-side norms did not settle", prev)


# -- divergence probes -------------------------------------------------------------------


@dataclass
class DivergenceReport:
    radii: list
    values: list
    ratios: list
    growth_exponent: float
    log_slope: float
    verdict: str
    margin: float

    def to_json(self) -> dict:
        return asdict(self)


def divergence_probe(integrand: Callable, ks: Sequence[int] = tuple(range(2, 13)), singular_angles=(),
                     margin: float = DIVERGENCE_MARGIN, tail: int = 4,
                     spec: QuadratureSpec | None = None) -> DivergenceReport:
    """Truncated integrals ``I(r_k) = int_{|w| < r_k} integrand dA`` with ``r_k = 1 - 2^-k``.

    ``growth_exponent`` is the least-squares slope of ``log(I_{k+1} - I_k)``
    against ``log(1 - r_k)`` over the tail; for ``I ~ (1 - r)^-s`` it tends
    to ``-s``.  ``log_slope`` is the slope of ``log I`` itself.  The verdict
    is DIVERGENT when every tail ratio ``I_{k+1}/I_k`` is at least
    ``1 + margin`` and ``log_slope < 0``.
    """
    spec = spec or QuadratureSpec(rel_tol=1e-9, abs_tol=1e-14)
    ks = list(ks)
    radii = [1 - 2.0**-k for k in ks]
    vals = [float(np.real(integrate_disk(integrand, radius=r, spec=spec, singular_angles=singular_angles)))
            for r in radii]
    ratios = [vals[i + 1] / vals[i] if vals[i] != 0 else math.inf for i in range(len(vals) - 1)]
    x = np.log([1 - r for r in radii])
    inc = np.diff(vals)
    tail_n = min(tail, inc.size)
    with np.errstate(divide="ignore", invalid="ignore"):
        ly = np.log(np.abs(inc[-tail_n:]))
        growth = float(np.polyfit(x[:-1][-tail_n:], ly, 1)[0]) if np.all(np.isfinite(ly)) else math.nan
        lv = np.log(np.abs(vals[-tail_n - 1:]))
        log_slope = float(np.polyfit(x[-tail_n - 1:], lv, 1)[0]) if np.all(np.isfinite(lv)) else math.nan
    tail_ratios = ratios[-tail_n:]
    divergent = all(r >= 1 + margin for r in tail_ratios) and log_slope < 0
    return DivergenceReport(radii, vals, ratios, growth, log_slope, "DIVERGENT" if divergent else "CONVERGENT", margin)


def psi_power_integrand(config: PrevertexConfig, p: float, scale: float = 1.0) -> Callable:
    """``scale * |psi'(w)|^(2 - p)``: the outer integrand for a constant inner projection."""
    from .scmap import psi_prime as _psi_prime
    return lambda w: scale * np.abs(_psi_prime(config, w)) ** (2 - p)


def e0a_integrand(config: PrevertexConfig, vertex: int, lam_disk: complex = 0.0) -> Callable:
    """``|1 - conj(z_m) w|^(-1-alpha_m) |psi'(w)| / |1 - phi(lambda) conj(w)|^2`` with ``phi(lambda) = lam_disk``."""
    from .scmap import psi_prime as _psi_prime
    c = np.conj(config.prevertices[vertex])
    am = config.alphas[vertex]
    return lambda w: (np.abs(1 - c * w) ** (-1 - am) * np.abs(_psi_prime(config, w))
                      / np.abs(1 - lam_disk * np.conj(w)) ** 2)


# -- worked disk examples -------------------------------------------------------------------


def example_53_identity(n: int, check_points=None, numeric: bool = True) -> dict:
    """``P((1 - |z|^2)(1 + |z|^2 - 2z) z^n) = 2 z^n (1 - z) / (n + 3)``, exactly and numerically."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    zbar_z = DiskPolynomial({(1, 1): 1})
    poly = ONE_MINUS_ABS2 * (DiskPolynomial({(0, 0): 1}) + zbar_z - DiskPolynomial({(1, 0): 2})) \
        * DiskPolynomial.monomial(n)
    got = poly.project()
    expected = {n: Fraction(2, n + 3), n + 1: Fraction(-2, n + 3)}
    out = {"n": n, "exact": got == expected, "coefficients": {str(k): str(v) for k, v in got.items()},
           "expected": {str(k): str(v) for k, v in expected.items()}}
    if numeric:
        pts = np.asarray(check_points if check_points is not None
                         else [0, 0.3, -0.2 + 0.4j, 0.5j, -0.45 - 0.1j], dtype=complex)
        num = np.asarray(disk_project(poly, pts))
        closed = 2 * pts**n * (1 - pts) / (n + 3)
        out["numeric_residual"] = float(np.max(np.abs(num - closed)))
    return out


def theta_integral_closed_form(n: int, m: int, r: float, z: complex) -> complex:
    return 2 * math.pi * (z - 1) ** (m - 1) * ((n + m + 1) * z ** (n + 1) - (n + 1) * z**n) * r ** (n + m)


def example_54_theta_integral(n: int, m: int, r: float, z: complex, spec: QuadratureSpec = DEFAULT_SPEC) -> dict:
    """``int_0^2pi e^{in t}(e^{it} - r)^m / (1 - z r e^{-it})^2 dt`` against its closed form."""
    if m < 2:
        raise ValueError("m must be at least 2")
    if not 0 < r < 1 or abs(z) >= 1:
        raise ValueError("need 0 < r < 1 and |z| < 1")

    def g(t):
        e = np.exp(1j * t)
        return e**n * (e - r) ** m / (1 - z * r / e) ** 2

    numeric = complex(2 * math.pi * integrate_circle(g, spec))
    closed = complex(theta_integral_closed_form(n, m, r, complex(z)))
    res = abs(numeric - closed)
    return {"numeric": numeric, "example_53": closed, "residual": res, "relative": res / (1 + abs(closed))}


def example_e0b_boundedness(config: PrevertexConfig, p: float, t: float, exponents: Sequence[float],
                            vertex: int | None = None, growth_limit: float = 0.10,
                            control_ks: Sequence[int] = tuple(range(2, 13))) -> dict:
    """Norm-ratio table for a corner-decaying symbol with ``1 < p < 4/3``.

    The symbol is ``a o psi(w) = (1 - conj(z_m) w)^t (1 - |w|^2)``, so
    ``|a| <= 2 |1 - conj(z_m) phi|^t``.  The family is
    ``f o psi = (1 - conj(z_m) w)^(-s)`` for the given exponents.  The
    control with ``a = 1`` and ``f o psi = (1 - conj(z_m) w)^(-1-alpha_m)``
    is run through :func:`divergence_probe` on the inner integral at
    ``phi(lambda) = 0``.
    """
    if vertex is None:
        vertex = int(np.argmax(config.alphas))
    c = np.conj(config.prevertices[vertex])
    rows = []
    for s in exponents:
        try:
            r = disk_side_norm_ratio(config, p, lambda w, s=s: (1 - c * w) ** (-s),
                                     lambda w: (1 - c * w) ** t, weighted=True, vertex=vertex)
            rows.append({"parameter": float(s), **r, "status": "ok"})
        except Exception as exc:  # quadrature failure for one member is recorded, not fatal
            rows.append({"parameter": float(s), "norm_Tf": math.inf, "norm_f": math.nan, "ratio": math.inf,
                         "status": f"failed: {exc}"})
    table = _table(rows, growth_limit)
    control = divergence_probe(e0a_integrand(config, vertex), control_ks,
                               singular_angles=[float(np.angle(config.prevertices[vertex]))])
    return {"table": table, "control": control, "t": t, "p": p, "vertex": vertex}
