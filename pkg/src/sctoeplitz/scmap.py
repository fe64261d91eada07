"""Schwarz-Christoffel maps of the unit disk onto a polygon.

The forward map is

    psi(z) = A * int_0^z prod_k (1 - conj(z_k) zeta)**(alpha_k - 1) dzeta + B

with prevertices ``z_k`` on the unit circle.  Each power uses the principal
branch; ``Re(1 - conj(z_k) zeta) > 0`` on the open disk so the integrand is
single valued there.

Line integrals of the integrand are computed by a compound Gauss-Legendre
rule: a straight path is bisected until every piece is no longer than its
distance to the nearest prevertex.  Pieces ending *at* a prevertex use a
Gauss-Jacobi rule that absorbs the endpoint power.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Polygon, WhitneyDecomposition, _segments_intersect, contains, dist_to_boundary, enlarge
from .quadrature import QuadratureError, compound_segment_integral, gauss_jacobi

CROWDING_GAP = 1e-10


class SCError(RuntimeError):
    """Base class for mapping failures."""


class ParameterSolveError(SCError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (best residual {residual:.3e})")
        self.residual = residual


class InverseMapError(SCError):
    pass


class DomainError(ValueError):
    """Point outside the domain of the requested map."""


class CrowdingWarning(UserWarning):
    pass


def _hex(x: float) -> str:
    return float(x).hex()


def _unhex(s) -> float:
    return float.fromhex(s) if isinstance(s, str) else float(s)


@dataclass(frozen=True)
class PrevertexConfig:
    """Prevertex arguments, angle factors and the constants ``A`` (scale) and ``B`` (offset)."""

    args: np.ndarray
    alphas: np.ndarray
    A: complex
    B: complex

    def __post_init__(self):
        args = np.asarray(self.args, dtype=float).copy()
        alphas = np.asarray(self.alphas, dtype=float).copy()
        if args.shape != alphas.shape or args.ndim != 1:
            raise ValueError("args and alphas must be 1-d of equal length")
        if np.any(np.diff(args) <= 0) or args[-1] - args[0] >= 2 * np.pi:
            raise ValueError("prevertex arguments must increase strictly within one turn")
        if complex(self.A) == 0:
            raise ValueError("A must be nonzero")
        args.setflags(write=False)
        alphas.setflags(write=False)
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "A", complex(self.A))
        object.__setattr__(self, "B", complex(self.B))

    @property
    def prevertices(self) -> np.ndarray:
        return np.exp(1j * self.args)

    @property
    def n(self) -> int:
        return self.args.size

    def min_gap(self) -> float:
        gaps = np.diff(np.concatenate([self.args, [self.args[0] + 2 * np.pi]]))
        return float(gaps.min())

    def to_json(self) -> dict:
        return {
            "prevertices": [_hex(a) for a in self.args],
            "alphas": [_hex(a) for a in self.alphas],
            "A": [_hex(self.A.real), _hex(self.A.imag)],
            "B": [_hex(self.B.real), _hex(self.B.imag)],
        }

    @classmethod
    def from_json(cls, doc) -> "PrevertexConfig":
        if isinstance(doc, str):
            doc = json.loads(doc)
        return cls(
            np.array([_unhex(a) for a in doc["prevertices"]]),
            np.array([_unhex(a) for a in doc["alphas"]]),
            complex(_unhex(doc["A"][0]), _unhex(doc["A"][1])),
            complex(_unhex(doc["B"][0]), _unhex(doc["B"][1])),
        )


class _Integrand:
    """``prod_k (1 - conj(z_k) zeta)**beta_k`` and its line integrals."""

    def __init__(self, prevertices: np.ndarray, betas: np.ndarray, nodes: int = 16, jacobi_nodes: int = 24):
        self.zk = np.asarray(prevertices, dtype=complex)
        self.czk = np.conj(self.zk)
        self.betas = np.asarray(betas, dtype=float)
        self.nodes = nodes
        self.jacobi_nodes = jacobi_nodes

    def __call__(self, zeta) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=complex)
        logs = np.log(1.0 - zeta[..., None] * self.czk)
        return np.exp(logs @ self.betas)

    def log_derivative(self, zeta) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=complex)
        return (-self.czk / (1.0 - zeta[..., None] * self.czk)) @ self.betas

    def path_integral(self, a, b) -> np.ndarray:
        """``int_a^b`` along straight segments; neither end may be a prevertex."""
        try:
            return compound_segment_integral(self, a, b, self.zk, self.nodes)
        except QuadratureError as exc:
            raise SCError("path passes through a prevertex") from exc

    def vertex_integral(self, k: int) -> complex:
        """``int_0^{z_k}`` along the radius, with a Gauss-Jacobi rule at ``z_k``."""
        zk = self.zk[k]
        others = np.delete(self.zk, k)
        delta = float(np.abs(others - zk).min()) if others.size else 2.0
        tau = min(0.5, delta / 4)
        c = zk * (1 - tau)
        head = self.path_integral(np.array([0j]), np.array([c]))[0]
        x, w = gauss_jacobi(self.jacobi_nodes, float(self.betas[k]), 0.0)
        pts = c + (zk - c) * (1 + x) / 2
        mask = np.arange(self.zk.size) != k
        smooth = np.exp(np.log(1.0 - pts[:, None] * self.czk[mask]) @ self.betas[mask])
        # 1 - conj(z_k) zeta = ((z_k - c) / (2 z_k)) (1 - t) with (1 - t) > 0
        factor = ((zk - c) / (2 * zk)) ** self.betas[k]
        tail = np.sum(smooth * w) * factor * (zk - c) / 2
        return head + tail


def _params_to_args(y: np.ndarray, n: int) -> np.ndarray:
    """Free parameters -> prevertex arguments; the first three are pinned."""
    fixed = np.array([0.0, 2 * np.pi / n, 4 * np.pi / n])
    if n == 3:
        return fixed
    span = 2 * np.pi - fixed[2]
    logits = np.concatenate([y, [0.0]])
    g = np.exp(logits - logits.max())
    gaps = span * g / g.sum()
    return np.concatenate([fixed, fixed[2] + np.cumsum(gaps[:-1])])


def _args_to_params(args: np.ndarray) -> np.ndarray:
    n = args.size
    if n == 3:
        return np.zeros(0)
    gaps = np.diff(np.concatenate([args[2:], [2 * np.pi]]))
    return np.log(gaps[:-1] / gaps[-1])


def solve_parameter_problem(polygon: Polygon, tol: float = 1e-13, max_iter: int = 60,
                            nodes: int = 16, initial_args=None) -> PrevertexConfig:
    """Find prevertices, ``A`` and ``B`` reproducing the polygon's vertices.

    Unknowns are the ``n - 3`` free gaps between prevertices (three are pinned
    at arguments ``0, 2pi/n, 4pi/n``); equations match the log side-length
    ratios ``|w_{k+1} - w_k| / |w_1 - w_0|`` for ``k = 1..n-3``.  Damped Newton
    with a central-difference Jacobian and step halving.
    """
    w = polygon.vertices
    n = polygon.n
    betas = polygon.angle_factors - 1.0
    target = np.log(np.abs(np.roll(w, -1) - w))
    target = target[1:n - 2] - target[0]

    def vertex_integrals(args):
        f = _Integrand(np.exp(1j * args), betas, nodes)
        return np.array([f.vertex_integral(k) for k in range(n)])

    def residual(y):
        F = vertex_integrals(_params_to_args(y, n))
        side = np.log(np.abs(np.roll(F, -1) - F))
        return side[1:n - 2] - side[0] - target

    y = np.zeros(n - 3) if initial_args is None else _args_to_params(np.asarray(initial_args, dtype=float))
    r = residual(y)
    norm = float(np.linalg.norm(r)) if r.size else 0.0
    it = 0
    while norm > tol and it < max_iter:
        it += 1
        h = 1e-6
        J = np.empty((n - 3, n - 3))
        for j in range(n - 3):
            e = np.zeros(n - 3)
            e[j] = h
            J[:, j] = (residual(y + e) - residual(y - e)) / (2 * h)
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        lam = 1.0
        while lam > 1e-6:
            y_new = y + lam * step
            r_new = residual(y_new)
            norm_new = float(np.linalg.norm(r_new))
            if np.isfinite(norm_new) and norm_new < norm:
                break
            lam /= 2
        else:
            break
        y, r, norm = y_new, r_new, norm_new
    if norm > max(tol, 1e-10):
        raise ParameterSolveError("parameter problem did not converge", norm)
    args = _params_to_args(y, n)
    F = vertex_integrals(args)
    A = (w[1] - w[0]) / (F[1] - F[0])
    B = w[0] - A * F[0]
    config = PrevertexConfig(args, polygon.angle_factors, A, B)
    if config.min_gap() < CROWDING_GAP:
        warnings.warn(f"prevertex crowding: minimum gap {config.min_gap():.2e}", CrowdingWarning, stacklevel=2)
    return config


class ConformalMap:
    """Solved pair ``psi: disk -> polygon`` and ``phi = psi^{-1}``.

    ``psi(0) = B``; ``phi`` is computed by continuation from a table of
    anchor points followed by Newton iteration.
    """

    def __init__(self, polygon: Polygon, config: PrevertexConfig | None = None, nodes: int = 16,
                 newton_tol: float = 1e-13):
        self.polygon = polygon
        self.config = solve_parameter_problem(polygon, nodes=nodes) if config is None else config
        self.nodes = nodes
        self.newton_tol = newton_tol
        self._f = _Integrand(self.config.prevertices, self.config.alphas - 1.0, nodes)

    # -- forward map -------------------------------------------------------

    @property
    def prevertices(self) -> np.ndarray:
        return self.config.prevertices

    @property
    def alphas(self) -> np.ndarray:
        return self.config.alphas

    def psi(self, z) -> np.ndarray:
        return psi(self.config, z, _integrand=self._f)

    def psi_prime(self, z) -> np.ndarray:
        return self.config.A * self._f(z)

    def psi_second(self, z) -> np.ndarray:
        return self.psi_prime(z) * self._f.log_derivative(z)

    def integral(self, a, b) -> np.ndarray:
        """``A int_a^b`` of the integrand along the segment ``[a, b]``."""
        return self.config.A * self._f.path_integral(a, b)

    def vertex_images(self) -> np.ndarray:
        return np.array([self.config.B + self.config.A * self._f.vertex_integral(k) for k in range(self.config.n)])

    def vertex_residual(self) -> float:
        return float(np.max(np.abs(self.vertex_images() - self.polygon.vertices)))

    # -- inverse map -------------------------------------------------------

    @cached_property
    def _anchors(self):
        radii = np.array([0.0, 0.3, 0.5, 0.65, 0.75, 0.82, 0.87, 0.91, 0.94, 0.96, 0.975, 0.985, 0.99, 0.994,
                          0.997, 0.999])
        m = 48
        th = 2 * np.pi * (np.arange(m) + 0.5) / m
        pts = [np.array([0j]), (radii[1:, None] * np.exp(1j * th)[None, :]).ravel()]
        eta = np.array([-1.2, -0.6, 0.0, 0.6, 1.2])
        eps = 2.0 ** -np.arange(2, 41)
        for zk in self.prevertices:
            pts.append((zk * (1 - eps[:, None] * np.exp(1j * eta)[None, :])).ravel())
        z = np.concatenate(pts)
        z = z[np.abs(z) < 1]
        w = self.config.B + self.integral(np.zeros_like(z), z)
        tree = cKDTree(np.column_stack([w.real, w.imag]))
        return z, w, tree

    def _visible(self, p, q) -> np.ndarray:
        a, b = self.polygon.edges
        hits = _segments_intersect(p[..., None], q[..., None], a, b)
        return ~hits.any(axis=-1)

    def phi(self, w, check_domain: bool = True) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        shape = w.shape
        flat = w.ravel()
        if check_domain and flat.size:
            inside = np.atleast_1d(contains(self.polygon, flat))
            if not inside.all():
                bad = flat[~inside][0]
                raise DomainError(f"point {bad} is not interior to the polygon")
        out = np.empty(flat.size, dtype=complex)
        for start in range(0, flat.size, 4096):
            try:
                out[start:start + 4096] = self._phi_block(flat[start:start + 4096])
            except InverseMapError:
                raise
            except SCError as exc:
                raise InverseMapError(f"inverse map unresolvable in double precision: {exc}") from exc
        return out.reshape(shape) if shape else complex(out[0])

    def _phi_block(self, w: np.ndarray) -> np.ndarray:
        if w.size == 0:
            return w.copy()
        az, aw, tree = self._anchors
        k = min(12, az.size)
        _, idx = tree.query(np.column_stack([w.real, w.imag]), k=k)
        idx = idx.reshape(w.size, k)
        vis = self._visible(aw[idx], w[:, None])
        first = np.argmax(vis, axis=1)
        if not vis[np.arange(w.size), first].all():
            raise InverseMapError("no visible anchor for some target points")
        pick = idx[np.arange(w.size), first]
        z0, w0 = az[pick], aw[pick]
        diam = self.polygon.diameter
        for steps in (12, 48, 192):
            z = self._continuation(z0, w0, w, steps)
            z, val, ok = self._newton(z, w0 + self.integral(z0, z), w, diam)
            if ok.all():
                return z
            # retry the failures with a finer continuation
            bad = ~ok
            sub = self._phi_retry(z0[bad], w0[bad], w[bad], diam, steps)
            if sub is not None:
                z[bad] = sub
                return z
        raise InverseMapError("Newton iteration for the inverse map did not converge")

    def _phi_retry(self, z0, w0, w, diam, steps):
        for s in (4 * steps, 16 * steps):
            z = self._continuation(z0, w0, w, s)
            z, _, ok = self._newton(z, w0 + self.integral(z0, z), w, diam)
            if ok.all():
                return z
        return None

    def _continuation(self, z0, w0, w, steps):
        """RK4 for ``dz/dt = (w - w0) / psi'(z)`` on ``t in [0, 1]``."""
        dw = w - w0
        z = z0.copy()
        h = 1.0 / steps

        def rhs(zz):
            r = np.abs(zz)
            zz = np.where(r < 1, zz, zz / np.maximum(r, 1.0) * (1 - 1e-15))
            return dw / self.psi_prime(zz)

        for _ in range(steps):
            k1 = rhs(z)
            k2 = rhs(z + h / 2 * k1)
            k3 = rhs(z + h / 2 * k2)
            k4 = rhs(z + h * k3)
            z = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            r = np.abs(z)
            z = np.where(r < 1, z, z / np.maximum(r, 1.0) * (1 - 1e-12))
        return z

    def _newton(self, z, val, w, diam, max_iter: int = 40):
        """Polish ``psi(z) = w``; ``val`` is the current ``psi(z)``."""
        tol = self.newton_tol * diam
        ok = np.abs(val - w) <= tol
        for _ in range(max_iter):
            act = ~ok
            if not act.any():
                break
            za, res = z[act], val[act] - w[act]
            step = -res / self.psi_prime(za)
            lam = np.ones(za.size)
            for _ in range(60):
                out = np.abs(za + lam * step) >= 1
                if not out.any():
                    break
                lam = np.where(out, lam / 2, lam)
            zn = za + lam * step
            vn = val[act] + self.integral(za, zn)
            z[act], val[act] = zn, vn
            ok[act] = (np.abs(vn - w[act]) <= tol) | (np.abs(lam * step) <= 4e-16 * np.maximum(np.abs(zn), 1e-300))
        return z, val, ok

    # -- derivatives of phi --------------------------------------------------

    def phi_prime(self, w, zeta=None) -> np.ndarray:
        zeta = self.phi(w) if zeta is None else zeta
        return phi_derivatives_at(self.config, zeta)[0]

    def phi_derivatives(self, w, zeta=None):
        zeta = self.phi(w) if zeta is None else zeta
        return phi_derivatives_at(self.config, zeta)

    def koebe_ratio(self, w) -> np.ndarray:
        return koebe_ratio(self, w)


def psi(config: PrevertexConfig, z, _integrand: _Integrand | None = None):
    """Forward map; exact vertices when ``z`` is a prevertex."""
    f = _integrand or _Integrand(config.prevertices, config.alphas - 1.0)
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) > 1 + 1e-14):
        raise DomainError("psi is defined on the closed unit disk")
    flat = z.ravel()
    out = np.empty(flat.size, dtype=complex)
    zk = config.prevertices
    hit = np.abs(flat[:, None] - zk[None, :]) == 0
    at_vertex = hit.any(axis=1)
    regular = ~at_vertex
    out[regular] = config.B + config.A * f.path_integral(np.zeros(regular.sum(), dtype=complex), flat[regular])
    for i in np.flatnonzero(at_vertex):
        k = int(np.argmax(hit[i]))
        out[i] = config.B + config.A * f.vertex_integral(k)
    return out.reshape(z.shape) if z.shape else complex(out[0])


def psi_prime(config: PrevertexConfig, z):
    """``psi'(z) = A prod (1 - conj(z_k) z)**(alpha_k - 1)`` on the open disk."""
    return config.A * _Integrand(config.prevertices, config.alphas - 1.0)(z)


def phi(cmap: ConformalMap, w):
    return cmap.phi(w)


def phi_derivatives_at(config: PrevertexConfig, zeta):
    """``(phi', phi'', phi''')`` at the point whose image is ``zeta = phi(w)``.

    Products over the prevertices with ``G_k = 1 - zeta conj(z_k)``:

    * ``phi'   = A^-1 prod G_k^(1-a_k)``
    * ``phi''  = A^-2 sum_k (a_k-1) conj(z_k) G_k^(1-2a_k) prod_{j!=k} G_j^(2(1-a_j))``
    * ``phi''' = A^-3 sum_k [c_k G_k^(1-3a_k) prod_{j!=k} G_j^(3(1-a_j))
      + sum_{j!=k} c_kj G_k^(2-3a_k) G_j^(2-3a_j) prod_{i!=k,j} G_i^(3(1-a_i))]``

    with ``c_k = (1-a_k)(1-2a_k) conj(z_k)^2`` and
    ``c_kj = 2(1-a_k)(1-a_j) conj(z_k) conj(z_j)``.
    """
    zeta = np.asarray(zeta, dtype=complex)
    a = config.alphas
    cz = np.conj(config.prevertices)
    A = config.A
    logG = np.log(1.0 - zeta[..., None] * cz)

    def pw(e):
        return np.exp(logG * e)

    d1 = np.exp(logG @ (1 - a)) / A
    n = a.size
    base2 = logG @ (2 * (1 - a))
    base3 = logG @ (3 * (1 - a))
    d2 = np.zeros(zeta.shape, dtype=complex)
    d3 = np.zeros(zeta.shape, dtype=complex)
    for k in range(n):
        others2 = np.exp(base2 - logG[..., k] * 2 * (1 - a[k]))
        d2 = d2 + (a[k] - 1) * cz[k] * pw(1 - 2 * a[k])[..., k] * others2
        ck = (1 - a[k]) * (1 - 2 * a[k]) * cz[k] ** 2
        others3 = np.exp(base3 - logG[..., k] * 3 * (1 - a[k]))
        d3 = d3 + ck * pw(1 - 3 * a[k])[..., k] * others3
        for j in range(n):
            if j == k:
                continue
            ckj = 2 * (1 - a[k]) * (1 - a[j]) * cz[k] * cz[j]
            rest = np.exp(base3 - logG[..., k] * 3 * (1 - a[k]) - logG[..., j] * 3 * (1 - a[j]))
            d3 = d3 + ckj * np.exp(logG[..., k] * (2 - 3 * a[k]) + logG[..., j] * (2 - 3 * a[j])) * rest
    return d1, d2 / A**2, d3 / A**3


def koebe_ratio(cmap: ConformalMap, w) -> np.ndarray:
    """``dist(w, boundary) |phi'(w)| / (1 - |phi(w)|^2)``; lies in ``[1/4, 1]``."""
    zeta = cmap.phi(w)
    d1 = phi_derivatives_at(cmap.config, zeta)[0]
    return dist_to_boundary(w, cmap.polygon) * np.abs(d1) / (1 - np.abs(zeta) ** 2)


def whitney_kernel_bounds(cmap: ConformalMap, decomposition: WhitneyDecomposition, grid: int = 3,
                          z_samples=None) -> dict:
    """Empirical constants of the near-boundary derivative estimates.

    Over sample points ``w`` of every enlarged square (a ``grid x grid``
    lattice) reports the suprema of

    * ``rho |phi''(w)| / |phi'(w)|``
    * ``rho**2 |phi'''(w)| / |phi'(w)|``
    * ``rho |phi'(w)| / |1 - phi(z) conj(phi(w))|`` over ``z``; without
      ``z_samples`` the infimum ``1 - |phi(w)|`` of the denominator is used,

    together with the range of ``rho / dist(w, boundary)``.
    """
    t = (np.arange(grid) + 0.5) / grid
    rel = (t[:, None] + 1j * t[None, :]).ravel()
    pts, rhos, levels = [], [], []
    for sq, lvl in zip(decomposition.squares, decomposition.levels):
        big = enlarge(sq)
        pts.append(big.anchor + big.side * rel)
        rhos.append(np.full(rel.size, sq.side))
        levels.append(np.full(rel.size, lvl))
    w = np.concatenate(pts)
    rho = np.concatenate(rhos)
    lev = np.concatenate(levels)
    zeta = cmap.phi(w)
    d1, d2, d3 = phi_derivatives_at(cmap.config, zeta)
    r2 = rho * np.abs(d2) / np.abs(d1)
    r3 = rho**2 * np.abs(d3) / np.abs(d1)
    if z_samples is None:
        denom = 1 - np.abs(zeta)
    else:
        zz = cmap.phi(np.asarray(z_samples, dtype=complex))
        denom = np.abs(1 - zz[None, :] * np.conj(zeta)[:, None]).min(axis=1)
    r4 = rho * np.abs(d1) / denom
    ratio = rho / dist_to_boundary(w, cmap.polygon)

    def per_level(x):
        return {int(l): float(x[lev == l].max()) for l in np.unique(lev)}

    return {
        "second": float(r2.max()),
        "third": float(r3.max()),
        "kernel": float(r4.max()),
        "second_by_level": per_level(r2),
        "third_by_level": per_level(r3),
        "kernel_by_level": per_level(r4),
        "rho_over_dist_min": float(ratio.min()),
        "rho_over_dist_max": float(ratio.max()),
    }


def conformal_map(polygon: Polygon, **kwargs) -> ConformalMap:
    return ConformalMap(polygon, **kwargs)


def equispaced_config(alphas, A: complex = 1.0, B: complex = 0.0) -> PrevertexConfig:
    """Prevertices ``exp(2 pi i k / n)`` with the given angle factors."""
    alphas = np.asarray(alphas, dtype=float)
    n = alphas.size
    if abs(alphas.sum() - (n - 2)) > 1e-12:
        raise ValueError("angle factors must sum to n - 2")
    return PrevertexConfig(2 * np.pi * np.arange(n) / n, alphas, A, B)


def map_from_config(config: PrevertexConfig, **kwargs) -> ConformalMap:
    """Conformal map whose polygon is the image of the given prevertices.

    Raises :class:`~sctoeplitz.geometry.GeometryError` when the image
    polygon is not simple.
    """
    f = _Integrand(config.prevertices, config.alphas - 1.0)
    vertices = config.B + config.A * np.array([f.vertex_integral(k) for k in range(config.n)])
    return ConformalMap(Polygon(vertices), config, **kwargs)


def corner_domain(alpha_max: float, n: int = 6) -> ConformalMap:
    """Polygon with one inward corner ``alpha_max`` at ``psi(1)`` and equal outward corners.

    Prevertices are equispaced, so the large corner is well separated from
    the others on the circle and its local power law sets in early.
    """
    rest = (n - 2 - alpha_max) / (n - 1)
    if not 0 < rest < 1:
        raise ValueError("other angle factors must lie in (0, 1)")
    return map_from_config(equispaced_config([alpha_max] + [rest] * (n - 1)))
