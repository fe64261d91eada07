"""Bergman kernels, disk projections and norm diagnostics.

The kernel of a simply connected domain is transported from the disk,

    K(z, w) = phi'(z) conj(phi'(w)) / (1 - phi(z) conj(phi(w)))**2,

and integrals over the domain are taken on a Whitney truncation: a tensor
Gauss rule on every square of the decomposition up to some level.  Values
for successive truncation levels are extrapolated to the full domain.

Exact monomial projections on the disk are implemented with
:class:`fractions.Fraction` and serve as oracles for the numerical ones.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .geometry import WhitneyDecomposition, dist_to_boundary
from .quadrature import DEFAULT_SPEC, QuadratureSpec, gauss_legendre, integrate_circle, integrate_disk
from .scmap import ConformalMap, phi_derivatives_at


class DivergenceError(ArithmeticError):
    """Truncated integrals did not settle as the truncation was relaxed."""

    def __init__(self, message: str, partial_values=None):
        super().__init__(message)
        self.partial_values = partial_values


# -- kernel ---------------------------------------------------------------------


class KernelContext:
    """A conformal map plus a point cache of ``(phi, phi')``."""

    def __init__(self, cmap: ConformalMap):
        self.map = cmap
        self._cache: dict[complex, tuple[complex, complex]] = {}
        self._lock = threading.Lock()

    def phi_data(self, w) -> tuple[np.ndarray, np.ndarray]:
        w = np.asarray(w, dtype=complex)
        flat = w.ravel()
        with self._lock:
            missing = np.array([x not in self._cache for x in flat.tolist()], dtype=bool)
        if missing.any():
            todo = np.unique(flat[missing])
            zeta = np.atleast_1d(self.map.phi(todo))
            d1 = 1.0 / self.map.psi_prime(zeta)
            with self._lock:
                for key, a, b in zip(todo.tolist(), zeta.tolist(), d1.tolist()):
                    self._cache[key] = (a, b)
        with self._lock:
            vals = [self._cache[x] for x in flat.tolist()]
        zeta = np.array([v[0] for v in vals], dtype=complex).reshape(w.shape)
        d1 = np.array([v[1] for v in vals], dtype=complex).reshape(w.shape)
        return zeta, d1

    def green_factor(self, z, w) -> np.ndarray:
        """``G(z, w) = 1 - phi(z) conj(phi(w))``."""
        zz, _ = self.phi_data(z)
        zw, _ = self.phi_data(w)
        return 1.0 - zz * np.conj(zw)


def kernel_from_data(zeta_z, d1_z, zeta_w, d1_w) -> np.ndarray:
    """Kernel from precomputed ``phi`` and ``phi'`` values (broadcasting)."""
    return d1_z * np.conj(d1_w) / (1.0 - zeta_z * np.conj(zeta_w)) ** 2


def kernel(ctx: KernelContext, z, w) -> np.ndarray:
    zz, dz = ctx.phi_data(z)
    zw, dw = ctx.phi_data(w)
    return kernel_from_data(zz, dz, zw, dw)


def disk_kernel(z, w) -> np.ndarray:
    return 1.0 / (1.0 - np.asarray(z) * np.conj(w)) ** 2


# -- Whitney quadrature over the domain -------------------------------------------


class WhitneyQuadrature:
    """Tensor Gauss nodes on every square of a decomposition, with map data at the nodes.

    Nodes are stored square by square in decomposition order, so per-square
    and per-level sums are contiguous.  Weights are for ``dA = dx dy / pi``.
    """

    def __init__(self, cmap: ConformalMap, decomposition: WhitneyDecomposition, order: int = 6):
        self.map = cmap
        self.decomposition = decomposition
        self.order = order
        x, w = gauss_legendre(order)
        t = (1 + x) / 2
        rel = (t[:, None] + 1j * t[None, :]).ravel()
        rw = (w[:, None] * w[None, :]).ravel() / 4
        anchors, sides = decomposition.anchors, decomposition.sides
        per = rel.size
        self.points = (anchors[:, None] + sides[:, None] * rel[None, :]).ravel()
        self.weights = (sides[:, None] ** 2 * rw[None, :] / math.pi).ravel()
        self.square = np.repeat(np.arange(len(decomposition)), per)
        self.level = np.repeat(np.asarray(decomposition.levels), per)
        self.nodes_per_square = per
        self.zeta = np.asarray(cmap.phi(self.points))
        self.d1 = 1.0 / cmap.psi_prime(self.zeta)

    @property
    def levels(self) -> np.ndarray:
        return np.unique(self.level)

    @cached_property
    def derivatives(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return phi_derivatives_at(self.map.config, self.zeta)

    @cached_property
    def boundary_distance(self) -> np.ndarray:
        return dist_to_boundary(self.points, self.map.polygon)

    def kernel_at(self, z) -> np.ndarray:
        """``K(z_i, node_j)`` as a ``(len(z), nodes)`` array."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        zz = np.atleast_1d(self.map.phi(z))
        dz = 1.0 / self.map.psi_prime(zz)
        return kernel_from_data(zz[:, None], dz[:, None], self.zeta[None, :], self.d1[None, :])

    def square_sums(self, values) -> np.ndarray:
        """Per-square integrals of node values (last axis is the node axis)."""
        v = np.asarray(values) * self.weights
        shape = v.shape[:-1] + (len(self.decomposition), self.nodes_per_square)
        return v.reshape(shape).sum(axis=-1)

    def level_integrals(self, values) -> dict[int, np.ndarray]:
        """Integral over the truncation up to each level (cumulative)."""
        per_square = self.square_sums(values)
        levels = np.asarray(self.decomposition.levels)
        out, acc = {}, 0
        for lvl in np.unique(levels):
            acc = acc + per_square[..., levels == lvl].sum(axis=-1)
            out[int(lvl)] = acc
        return out

    def integrate(self, values):
        return np.sum(np.asarray(values) * self.weights, axis=-1)


def richardson(values: Sequence, order: int = 1, ratio: float = 2.0):
    """Repeated Richardson elimination of error terms ``ratio**(-k L)``, ``k = 1..order``.

    ``values`` are results at consecutive truncation levels; the last entry is
    the finest.  Needs ``order + 1`` values.
    """
    vals = [np.asarray(v) for v in values]
    if len(vals) < order + 1:
        raise ValueError(f"need {order + 1} levels for order {order}")
    vals = vals[-(order + 1):]
    for k in range(1, order + 1):
        f = ratio**k
        vals = [(f * vals[i + 1] - vals[i]) / (f - 1) for i in range(len(vals) - 1)]
    return vals[-1]


def domain_integral_levels(quad: WhitneyQuadrature, integrand: Callable) -> dict[int, np.ndarray]:
    return quad.level_integrals(integrand(quad))


def maximal_project(quad: WhitneyQuadrature, g, z, settle_ratio: float = 0.75) -> np.ndarray:
    """``int |K(z, w)| g(w) dA(w)`` over the Whitney truncation.

    ``g`` is either an array of nonnegative node values or a callable of the
    node points.  Level increments must shrink by ``settle_ratio`` over the
    last two levels, otherwise :class:`DivergenceError` is raised with the
    per-level partial values.
    """
    vals = np.asarray(g(quad.points) if callable(g) else g, dtype=float)
    if np.any(vals < 0):
        raise ValueError("maximal projection needs a nonnegative integrand")
    K = np.abs(quad.kernel_at(z))
    partial = quad.level_integrals(K * vals)
    seq = [partial[l] for l in sorted(partial)]
    if len(seq) >= 4:
        inc = [float(np.max(np.abs(seq[i + 1] - seq[i]))) for i in range(len(seq) - 1)]
        if inc[-1] > settle_ratio * inc[-2] and inc[-2] > settle_ratio * inc[-3]:
            raise DivergenceError("maximal projection increments do not decay", partial)
    out = seq[-1]
    return out if np.ndim(z) else float(out[0])


# -- disk functions and projections ---------------------------------------------------


class DiskFunction:
    """A function on the disk given by Taylor coefficients or by an evaluator."""

    def __init__(self, coefficients=None, evaluator: Callable | None = None):
        if (coefficients is None) == (evaluator is None):
            raise ValueError("give exactly one of coefficients or evaluator")
        self.coefficients = None if coefficients is None else np.asarray(coefficients, dtype=complex)
        self.evaluator = evaluator

    @property
    def analytic(self) -> bool:
        return self.coefficients is not None

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        if self.evaluator is not None:
            return self.evaluator(z)
        out = np.zeros_like(z)
        for c in self.coefficients[::-1]:
            out = out * z + c
        return out

    def direct(self, z):
        z = np.asarray(z, dtype=complex)
        k = np.arange(self.coefficients.size)
        return np.sum(self.coefficients * z[..., None] ** k, axis=-1)

    def to_json(self) -> list:
        return [[float(c.real), float(c.imag)] for c in self.coefficients]

    @classmethod
    def from_json(cls, pairs) -> "DiskFunction":
        return cls(coefficients=[complex(a, b) for a, b in pairs])


def disk_project(f, z, spec: QuadratureSpec = DEFAULT_SPEC, numeric: bool = False,
                 singular_angles: Sequence[float] = ()):
    """``(P f)(z) = int_D f(w) / (1 - z conj(w))**2 dA(w)``.

    Coefficient-form analytic ``f`` is reproduced directly unless
    ``numeric`` is set; anything else goes through :func:`integrate_disk`.
    """
    if isinstance(f, DiskFunction) and f.analytic and not numeric:
        return f(z)
    fn = f if callable(f) else None
    if fn is None:
        raise TypeError("f must be callable")
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.array([integrate_disk(lambda w, zz=zz: fn(w) / (1.0 - zz * np.conj(w)) ** 2, spec=spec,
                                   singular_angles=singular_angles) for zz in z_arr])
    return out.reshape(np.shape(z)) if np.ndim(z) else complex(out[0])


@dataclass(frozen=True)
class MonomialProjection:
    coefficient: Fraction
    exponent: int | None

    def evaluate(self, z):
        return 0 * z if self.exponent is None else float(self.coefficient) * np.asarray(z) ** self.exponent


def disk_project_monomial(m: int, n: int, with_weight: bool = False) -> MonomialProjection:
    """Exact projection of ``z^m conj(z)^n`` (times ``1 - |z|^2`` if ``with_weight``).

    Orthogonality of monomials gives ``(m-n+1)/(m+1) z^(m-n)`` for ``m >= n``
    and zero otherwise; the weighted moment ``1/((m+1)(m+2))`` replaces
    ``1/(m+1)`` in the weighted case.
    """
    if m < 0 or n < 0:
        raise ValueError("exponents must be nonnegative")
    if m < n:
        return MonomialProjection(Fraction(0), None)
    c = Fraction(m - n + 1, m + 1)
    if with_weight:
        c /= m + 2
    return MonomialProjection(c, m - n)


class DiskPolynomial:
    """Finite sum ``sum c_{mn} z^m conj(z)^n`` with rational coefficients."""

    def __init__(self, terms: dict | None = None):
        self.terms = {k: Fraction(v) for k, v in (terms or {}).items() if Fraction(v) != 0}

    @classmethod
    def monomial(cls, m: int, n: int = 0, c=1) -> "DiskPolynomial":
        return cls({(m, n): c})

    def __add__(self, other):
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, Fraction(0)) + v
        return DiskPolynomial(out)

    def __neg__(self):
        return DiskPolynomial({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, DiskPolynomial):
            return DiskPolynomial({k: v * Fraction(other) for k, v in self.terms.items()})
        out: dict = {}
        for (a, b), u in self.terms.items():
            for (c, d), v in other.terms.items():
                key = (a + c, b + d)
                out[key] = out.get(key, Fraction(0)) + u * v
        return DiskPolynomial(out)

    __rmul__ = __mul__

    def project(self) -> dict[int, Fraction]:
        """Exact disk projection as analytic coefficients ``{k: c_k}``."""
        out: dict[int, Fraction] = {}
        for (m, n), c in self.terms.items():
            proj = disk_project_monomial(m, n)
            if proj.exponent is not None:
                out[proj.exponent] = out.get(proj.exponent, Fraction(0)) + c * proj.coefficient
        return {k: v for k, v in sorted(out.items()) if v != 0}

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for (m, n), c in self.terms.items():
            out = out + float(c) * z**m * np.conj(z) ** n
        return out


ONE_MINUS_ABS2 = DiskPolynomial({(0, 0): 1, (1, 1): -1})


def szego(boundary_values, z, spec: QuadratureSpec = DEFAULT_SPEC):
    """Cauchy-Szego integral ``(1/2pi) int g(e^{it}) / (1 - z e^{-it}) dt``.

    ``boundary_values`` is a callable of the angle ``t``.
    """
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.array([integrate_circle(lambda t, zz=zz: boundary_values(t) / (1.0 - zz * np.exp(-1j * t)), spec)
                    for zz in z_arr])
    return out.reshape(np.shape(z)) if np.ndim(z) else complex(out[0])


# -- norm diagnostics ---------------------------------------------------------------------


def disk_norm_p(f: Callable, p: float, spec: QuadratureSpec = DEFAULT_SPEC, singular_angles=()) -> float:
    """``int_D |f|^p dA`` (the p-th power of the norm)."""
    return float(integrate_disk(lambda w: np.abs(f(w)) ** p, spec=spec, singular_angles=singular_angles).real)


def calibrate_taylor_constant(p: float, max_degree: int = 32, margin: float = 2.0) -> float:
    """Constant for the coefficient sandwich, fitted on ``z^0 .. z^max_degree``.

    For ``z^n`` the norm is ``2/(np+2)`` exactly, so the ratios
    ``lower/norm`` and ``norm/upper`` are closed-form.
    """
    n = np.arange(max_degree + 1)
    norm = 2.0 / (n * p + 2)
    lower = 1.0 / (n + 1)
    upper = (n + 1.0) ** (p - 3)
    return margin * float(max(np.max(lower / norm), np.max(norm / upper)))


@dataclass(frozen=True)
class TaylorSandwich:
    lower_sum: float
    norm_p: float
    upper_sum: float
    constant: float

    @property
    def holds(self) -> bool:
        return self.lower_sum <= self.constant * self.norm_p and self.norm_p <= self.constant * self.upper_sum


def taylor_norm_sandwich(f: DiskFunction, p: float, constant: float | None = None,
                         spec: QuadratureSpec = DEFAULT_SPEC) -> TaylorSandwich:
    """Coefficient sums bracketing ``||f||_p^p`` for ``p > 2``."""
    if p <= 2:
        raise ValueError("the coefficient sandwich needs p > 2")
    if not isinstance(f, DiskFunction) or not f.analytic:
        raise TypeError("need a coefficient-form DiskFunction")
    a = np.abs(f.coefficients) ** p
    k = np.arange(a.size) + 1.0
    lower = float(np.sum(a / k))
    upper = float(np.sum(a * k ** (p - 3)))
    norm = disk_norm_p(f, p, spec)
    return TaylorSandwich(lower, norm, upper, calibrate_taylor_constant(p) if constant is None else constant)


@dataclass(frozen=True)
class AnalyticFamilyMember:
    """Analytic function on the domain given through its values on ``phi``-data."""

    label: float
    value: Callable
    first: Callable
    second: Callable


def corner_power_family(cmap: ConformalMap, vertex: int, exponents: Iterable[float]) -> list[AnalyticFamilyMember]:
    """``f_s = (1 - conj(z_m) phi)**(-s)`` with ``z_m`` the prevertex of ``vertex``.

    Each callable takes ``(zeta, d1, d2)`` (``phi`` and its derivatives).
    """
    c = np.conj(cmap.prevertices[vertex])
    out = []
    for s in exponents:
        def value(zeta, d1, d2, s=s):
            return (1 - c * zeta) ** (-s)

        def first(zeta, d1, d2, s=s):
            return s * c * d1 * (1 - c * zeta) ** (-s - 1)

        def second(zeta, d1, d2, s=s):
            u = 1 - c * zeta
            return s * c * (d2 * u ** (-s - 1) + (s + 1) * c * d1**2 * u ** (-s - 2))

        out.append(AnalyticFamilyMember(float(s), value, first, second))
    return out


def derivative_norm_ratio(quad: WhitneyQuadrature, family: Sequence[AnalyticFamilyMember], p: float,
                          stability: float = 0.10) -> dict:
    """``||v f'||_p / ||f||_p`` and ``||v^2 f''||_p / ||f||_p`` per family member.

    ``v`` is the distance to the boundary; norms are taken over the Whitney
    truncation.  ``stable`` reports whether the family-wide maximum moves by
    at most ``stability`` when the last member is added.
    """
    zeta, d1 = quad.zeta, quad.d1
    d2 = quad.derivatives[1]
    v = quad.boundary_distance
    rows = []
    for member in family:
        f = member.value(zeta, d1, d2)
        nf = quad.integrate(np.abs(f) ** p) ** (1 / p)
        r1 = quad.integrate(np.abs(v * member.first(zeta, d1, d2)) ** p) ** (1 / p) / nf
        r2 = quad.integrate(np.abs(v**2 * member.second(zeta, d1, d2)) ** p) ** (1 / p) / nf
        rows.append({"parameter": member.label, "first": float(r1), "second": float(r2)})
    first = [r["first"] for r in rows]
    second = [r["second"] for r in rows]
    stable = True
    if len(rows) >= 2:
        for col in (first, second):
            prev, full = max(col[:-1]), max(col)
            stable &= full <= (1 + stability) * prev if prev > 0 else full == 0
    return {"rows": rows, "max_first": max(first), "max_second": max(second), "stable": bool(stable)}
