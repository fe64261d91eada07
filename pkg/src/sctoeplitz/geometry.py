"""Polygons, boundary distance, and dyadic Whitney decompositions.

Points in the plane are complex numbers throughout.  A polygon is stored as
its counterclockwise vertex list; the interior-angle factors ``alpha_k``
(interior angle divided by pi) are derived on construction.

The Whitney construction is the classical dyadic one: starting from the
bounding square of the polygon, a dyadic square ``Q`` is *admissible* when it
lies in the domain and ``dist(Q, boundary) >= diam(Q)``.  The accepted squares
are the maximal admissible ones.  Maximality gives the upper bound
``dist(Q, boundary) < 4 diam(Q)`` because the parent square fails the test.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SQRT2 = math.sqrt(2.0)
ENLARGE_FACTOR = 11.0 / 10.0
OVERLAP_BOUND = 144
OVERLAP_REVIEW = 100

_COLLINEAR_TOL = 1e-9
_ACCEPT_RTOL = 1e-12


class GeometryError(ValueError):
    """Invalid polygon or geometric input."""


class WhitneyCapacityError(RuntimeError):
    """The dyadic refinement produced more squares than allowed."""


def _as_complex(points) -> np.ndarray:
    arr = np.asarray(points)
    if arr.dtype.kind == "c":
        return arr.astype(complex)
    arr = np.asarray(arr, dtype=float)
    if arr.ndim >= 1 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    return arr.astype(complex)


def _cross(a, b):
    return a.real * b.imag - a.imag * b.real


def _segments_intersect(p1, p2, q1, q2) -> np.ndarray:
    """Closed-segment intersection test, broadcasting over inputs."""
    d1 = _cross(q2 - q1, p1 - q1)
    d2 = _cross(q2 - q1, p2 - q1)
    d3 = _cross(p2 - p1, q1 - p1)
    d4 = _cross(p2 - p1, q2 - p1)
    proper = (d1 * d2 < 0) & (d3 * d4 < 0)

    def on_seg(a, b, c, d):
        return (d == 0) & (np.minimum(a.real, b.real) <= c.real) & (c.real <= np.maximum(a.real, b.real)) \
            & (np.minimum(a.imag, b.imag) <= c.imag) & (c.imag <= np.maximum(a.imag, b.imag))

    touching = on_seg(q1, q2, p1, d1) | on_seg(q1, q2, p2, d2) | on_seg(p1, p2, q1, d3) | on_seg(p1, p2, q2, d4)
    return proper | touching


def point_segment_distance(w, a, b) -> np.ndarray:
    """Euclidean distance from ``w`` to the closed segment ``[a, b]`` (broadcasting)."""
    w = np.asarray(w, dtype=complex)
    d = b - a
    dd = np.abs(d) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(dd > 0, ((w - a) * np.conj(d)).real / np.where(dd > 0, dd, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    return np.abs(w - (a + t * d))


@dataclass(frozen=True)
class Polygon:
    """A simple polygon given by counterclockwise vertices.

    ``angle_factors[k]`` is the interior angle at ``vertices[k]`` divided by pi.
    """

    vertices: np.ndarray
    angle_factors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        w = _as_complex(self.vertices).ravel()
        if w.size < 3:
            raise GeometryError("a polygon needs at least 3 vertices")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "vertices", w)
        if signed_area(w) <= 0:
            raise GeometryError("vertices must be listed counterclockwise")
        if not _is_simple(w):
            raise GeometryError("polygon boundary self-intersects")
        alphas = interior_angles(w)
        alphas.setflags(write=False)
        object.__setattr__(self, "angle_factors", alphas)

    @property
    def n(self) -> int:
        return self.vertices.size

    @property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices, np.roll(self.vertices, -1)

    @property
    def diameter(self) -> float:
        w = self.vertices
        return float(np.max(np.abs(w[:, None] - w[None, :])))

    @property
    def alpha_max(self) -> float:
        return float(np.max(self.angle_factors))

    @property
    def max_vertex(self) -> int:
        """Index of the vertex with the largest interior angle."""
        return int(np.argmax(self.angle_factors))

    @property
    def bounding_box(self) -> tuple[float, float, float, float]:
        w = self.vertices
        return float(w.real.min()), float(w.real.max()), float(w.imag.min()), float(w.imag.max())

    def contains(self, w) -> np.ndarray:
        """Strict interior membership (points on the boundary are outside)."""
        return contains(self, w)

    def to_json(self) -> dict:
        return {"vertices": [[float(v.real), float(v.imag)] for v in self.vertices]}

    @classmethod
    def from_json(cls, doc) -> "Polygon":
        if isinstance(doc, str):
            doc = json.loads(doc)
        return cls(np.asarray(doc["vertices"], dtype=float))


def signed_area(vertices) -> float:
    w = _as_complex(vertices)
    return 0.5 * float(np.sum(_cross(w, np.roll(w, -1))))


def _is_simple(w: np.ndarray) -> bool:
    n = w.size
    a, b = w, np.roll(w, -1)
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(a[i], b[i], a[j], b[j]):
                return False
    return True


def interior_angles(polygon) -> np.ndarray:
    """Angle factors ``alpha_k`` of a counterclockwise polygon.

    Raises ``GeometryError`` for collinear (``alpha_k = 1``) or degenerate
    (``alpha_k`` in {0, 2}) vertices.
    """
    w = polygon.vertices if isinstance(polygon, Polygon) else _as_complex(polygon).ravel()
    incoming = w - np.roll(w, 1)
    outgoing = np.roll(w, -1) - w
    if np.any(incoming == 0):
        raise GeometryError("repeated vertex")
    turn = np.angle(outgoing / incoming)
    alphas = 1.0 - turn / math.pi
    bad = np.abs(alphas - 1.0) < _COLLINEAR_TOL
    if np.any(bad):
        idx = np.flatnonzero(bad).tolist()
        raise GeometryError(f"collinear vertex (alpha = 1) at indices {idx}")
    if np.any((alphas <= _COLLINEAR_TOL) | (alphas >= 2.0 - _COLLINEAR_TOL)):
        raise GeometryError("degenerate vertex with alpha in {0, 2}")
    return alphas


def dist_to_boundary(w, polygon: Polygon) -> np.ndarray:
    """Exact distance ``dist(w, boundary)``: minimum over the edge segments."""
    w = np.asarray(w, dtype=complex)
    a, b = polygon.edges
    d = point_segment_distance(w[..., None], a, b)
    out = d.min(axis=-1)
    return out if out.ndim else float(out)


def contains(polygon: Polygon, w) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    a, b = polygon.edges
    x, y = w.real[..., None], w.imag[..., None]
    ya, yb = a.imag, b.imag
    crosses = (ya > y) != (yb > y)
    with np.errstate(invalid="ignore", divide="ignore"):
        xint = a.real + (y - ya) * (b.real - a.real) / (yb - ya)
    inside = np.sum(crosses & (x < xint), axis=-1) % 2 == 1
    inside &= dist_to_boundary(w, polygon) > 0
    return inside if inside.ndim else bool(inside)


@dataclass(frozen=True)
class Square:
    """Closed axis-parallel square ``S(anchor, side)``; ``anchor`` is the lower-left corner."""

    anchor: complex
    side: float

    def __post_init__(self):
        if not self.side > 0:
            raise GeometryError("square side must be positive")
        object.__setattr__(self, "anchor", complex(self.anchor))
        object.__setattr__(self, "side", float(self.side))

    @property
    def corner(self) -> complex:
        """The upper-right corner ``u + rho + i(v + rho)``."""
        return self.anchor + complex(self.side, self.side)

    @property
    def center(self) -> complex:
        return self.anchor + complex(self.side, self.side) / 2

    @property
    def area(self) -> float:
        return self.side**2

    @property
    def diameter(self) -> float:
        return SQRT2 * self.side

    def contains(self, w, closed: bool = True) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        x = w.real - self.anchor.real
        y = w.imag - self.anchor.imag
        if closed:
            return (x >= 0) & (x <= self.side) & (y >= 0) & (y <= self.side)
        return (x > 0) & (x < self.side) & (y > 0) & (y < self.side)

    def contains_square(self, other: "Square") -> bool:
        return bool(self.contains(other.anchor) and self.contains(other.corner))


def enlarge(square: Square) -> Square:
    """The enlarged square with side ``11/10 rho`` sharing the same center."""
    shift = square.side / 20.0
    return Square(square.anchor - complex(shift, shift), ENLARGE_FACTOR * square.side)


def square_boundary_distance(anchors, sides, polygon: Polygon) -> np.ndarray:
    """``dist(S, boundary)`` for filled squares; zero when an edge meets a square.

    Vectorized over ``anchors`` (complex) and ``sides``.
    """
    anchors = np.atleast_1d(np.asarray(anchors, dtype=complex))
    sides = np.broadcast_to(np.asarray(sides, dtype=float), anchors.shape)
    ea, eb = polygon.edges
    u0, v0 = anchors.real[:, None], anchors.imag[:, None]
    u1, v1 = u0 + sides[:, None], v0 + sides[:, None]

    def to_box(p):
        dx = np.maximum(np.maximum(u0 - p.real, 0.0), p.real - u1)
        dy = np.maximum(np.maximum(v0 - p.imag, 0.0), p.imag - v1)
        return np.hypot(dx, dy)

    d_vertices = to_box(ea[None, :]).min(axis=1)
    corners = anchors[:, None] + np.array([0, 1, 1 + 1j, 1j]) * sides[:, None]
    d_corners = point_segment_distance(corners[:, :, None], ea[None, None, :], eb[None, None, :]).min(axis=(1, 2))
    hit = _edges_hit_boxes(ea, eb, u0, u1, v0, v1)
    return np.where(hit, 0.0, np.minimum(d_vertices, d_corners))


def _edges_hit_boxes(ea, eb, u0, u1, v0, v1) -> np.ndarray:
    """Liang-Barsky clipping: does any polygon edge meet each closed box?"""
    d = eb - ea
    dx, dy = d.real[None, :], d.imag[None, :]
    x0, y0 = ea.real[None, :], ea.imag[None, :]
    t0 = np.zeros(np.broadcast_shapes(u0.shape, dx.shape))
    t1 = np.ones_like(t0)
    ok = np.ones(t0.shape, dtype=bool)
    for p, q in ((-dx, x0 - u0), (dx, u1 - x0), (-dy, y0 - v0), (dy, v1 - y0)):
        p = np.broadcast_to(p, t0.shape)
        q = np.broadcast_to(q, t0.shape)
        parallel = p == 0
        ok &= ~(parallel & (q < 0))
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(parallel, 0.0, q / np.where(parallel, 1.0, p))
        t0 = np.where(~parallel & (p < 0), np.maximum(t0, r), t0)
        t1 = np.where(~parallel & (p > 0), np.minimum(t1, r), t1)
    ok &= t0 <= t1
    return ok.any(axis=1)


@dataclass(frozen=True)
class WhitneyDecomposition:
    """Finite truncation of a dyadic Whitney decomposition.

    Squares are ordered level-major, then lexicographically by anchor
    ``(x, y)``.  Points with ``dist(w, boundary) >= collar`` are covered.
    """

    squares: tuple[Square, ...]
    levels: tuple[int, ...]
    indices: tuple[tuple[int, int], ...]
    origin: complex
    base_scale: float
    max_level: int

    @property
    def enlargements(self) -> tuple[Square, ...]:
        return tuple(enlarge(s) for s in self.squares)

    @property
    def collar(self) -> float:
        return collar_width(self.base_scale, self.max_level)

    def __len__(self) -> int:
        return len(self.squares)

    @property
    def anchors(self) -> np.ndarray:
        return np.array([s.anchor for s in self.squares], dtype=complex)

    @property
    def sides(self) -> np.ndarray:
        return np.array([s.side for s in self.squares], dtype=float)

    def level_counts(self) -> dict[int, int]:
        counts = {lvl: 0 for lvl in range(self.max_level + 1)}
        for lvl in self.levels:
            counts[lvl] += 1
        return counts

    def truncate(self, max_level: int) -> "WhitneyDecomposition":
        """Sub-decomposition keeping levels ``<= max_level`` (refinement is monotone)."""
        keep = [i for i, lvl in enumerate(self.levels) if lvl <= max_level]
        return WhitneyDecomposition(
            tuple(self.squares[i] for i in keep),
            tuple(self.levels[i] for i in keep),
            tuple(self.indices[i] for i in keep),
            self.origin, self.base_scale, max_level,
        )

    def level_offsets(self) -> list[int]:
        """``offsets[l]`` is the number of squares with level ``< l``."""
        counts = self.level_counts()
        out, acc = [], 0
        for lvl in range(self.max_level + 2):
            out.append(acc)
            acc += counts.get(lvl, 0)
        return out

    def to_json(self) -> list[dict]:
        return [
            {"anchor": [s.anchor.real, s.anchor.imag], "side": s.side, "level": lvl}
            for s, lvl in zip(self.squares, self.levels)
        ]


def collar_width(base_scale: float, max_level: int) -> float:
    """Width ``delta`` of the boundary layer a level-``max_level`` truncation may miss.

    A point at distance ``>= 2 sqrt(2) h`` (``h`` the finest side) lies in an
    admissible finest-level cell, hence in an accepted square.
    """
    return 2.0 * SQRT2 * base_scale * 2.0 ** (-max_level)


def admissible(anchors, sides, polygon: Polygon) -> np.ndarray:
    """Square inside the domain with ``dist(S, boundary) >= diam(S)``."""
    anchors = np.atleast_1d(np.asarray(anchors, dtype=complex))
    sides = np.broadcast_to(np.asarray(sides, dtype=float), anchors.shape)
    d = square_boundary_distance(anchors, sides, polygon)
    centers = anchors + (1 + 1j) * sides / 2
    inside = np.atleast_1d(contains(polygon, centers))
    return inside & (d >= SQRT2 * sides * (1.0 - _ACCEPT_RTOL))


def whitney_frame(polygon: Polygon) -> tuple[complex, float]:
    xmin, xmax, ymin, ymax = polygon.bounding_box
    return complex(xmin, ymin), max(xmax - xmin, ymax - ymin)


def whitney_decompose(polygon: Polygon, max_level: int, max_squares: int = 200_000) -> WhitneyDecomposition:
    """Dyadic Whitney squares of levels ``0..max_level``.

    Level ``l`` squares have side ``base_scale * 2**-l`` where ``base_scale`` is
    the side of the polygon's bounding square.
    """
    if max_level < 1:
        raise ValueError("max_level must be >= 1")
    origin, scale = whitney_frame(polygon)
    active = np.zeros((1, 2), dtype=np.int64)
    accepted: list[tuple[int, int, int]] = []
    for level in range(max_level + 1):
        if active.size == 0:
            break
        side = scale * 2.0**-level
        anchors = origin + side * (active[:, 0] + 1j * active[:, 1])
        ok = admissible(anchors, side, polygon)
        for i, j in active[ok]:
            accepted.append((level, int(i), int(j)))
        if len(accepted) > max_squares:
            raise WhitneyCapacityError(f"more than {max_squares} squares at level {level}")
        rest = active[~ok]
        if level == max_level or rest.size == 0:
            break
        # keep cells that meet the domain: center inside, or an edge touches the cell
        r_anchors = origin + side * (rest[:, 0] + 1j * rest[:, 1])
        meets = np.atleast_1d(contains(polygon, r_anchors + (1 + 1j) * side / 2))
        meets |= square_boundary_distance(r_anchors, side, polygon) == 0
        rest = rest[meets]
        kids = (2 * rest[:, None, :] + np.array([[0, 0], [1, 0], [0, 1], [1, 1]])[None]).reshape(-1, 2)
        if kids.shape[0] > 4 * max_squares:
            raise WhitneyCapacityError(f"refinement frontier exceeds capacity at level {level + 1}")
        active = kids
    accepted.sort(key=lambda t: (t[0], t[1], t[2]))
    squares = tuple(Square(origin + scale * 2.0**-l * (i + 1j * j), scale * 2.0**-l) for l, i, j in accepted)
    return WhitneyDecomposition(
        squares,
        tuple(l for l, _, _ in accepted),
        tuple((i, j) for _, i, j in accepted),
        origin, scale, max_level,
    )


def enlargement_overlap(decomposition: WhitneyDecomposition, points) -> np.ndarray:
    """Number of enlarged squares containing each point."""
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    anchors = decomposition.anchors
    sides = decomposition.sides
    lo = anchors - (1 + 1j) * sides / 20
    hi_side = ENLARGE_FACTOR * sides
    counts = np.zeros(pts.size, dtype=np.int64)
    for start in range(0, pts.size, 2048):
        p = pts[start:start + 2048, None]
        x = p.real - lo.real
        y = p.imag - lo.imag
        inside = (x >= 0) & (x <= hi_side) & (y >= 0) & (y <= hi_side)
        counts[start:start + 2048] = inside.sum(axis=1)
    return counts


def interiors_disjoint(decomposition: WhitneyDecomposition) -> bool:
    """Exact check on the dyadic index lattice of the finest level."""
    top = decomposition.max_level
    grid = np.zeros((2**top, 2**top), dtype=np.int32)
    for lvl, (i, j) in zip(decomposition.levels, decomposition.indices):
        k = 2 ** (top - lvl)
        grid[i * k:(i + 1) * k, j * k:(j + 1) * k] += 1
    return bool(grid.max(initial=0) <= 1)


def sample_interior(polygon: Polygon, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples from the polygon by rejection from the bounding box."""
    xmin, xmax, ymin, ymax = polygon.bounding_box
    out: list[np.ndarray] = []
    have = 0
    while have < count:
        pts = rng.uniform(xmin, xmax, 2 * count) + 1j * rng.uniform(ymin, ymax, 2 * count)
        pts = pts[np.atleast_1d(contains(polygon, pts))]
        out.append(pts)
        have += pts.size
    return np.concatenate(out)[:count]


def check_whitney_invariants(polygon: Polygon, decomposition: WhitneyDecomposition,
                             samples: int = 10_000, seed: int = 0) -> dict:
    """Summary of the Whitney decomposition properties on a finite truncation."""
    anchors, sides = decomposition.anchors, decomposition.sides
    d = square_boundary_distance(anchors, sides, polygon) if len(decomposition) else np.zeros(0)
    lower = bool(np.all(d >= SQRT2 * sides * (1 - _ACCEPT_RTOL)))
    upper = bool(np.all(d <= 4 * SQRT2 * sides * (1 + _ACCEPT_RTOL)))
    pts = sample_interior(polygon, samples, np.random.default_rng(seed))
    overlap = enlargement_overlap(decomposition, pts)
    covered_pts = pts[dist_to_boundary(pts, polygon) >= decomposition.collar]
    cover = _covered(decomposition, covered_pts)
    max_overlap = int(overlap.max(initial=0))
    return {
        "squares": len(decomposition),
        "level_counts": {str(k): v for k, v in decomposition.level_counts().items()},
        "disjoint": interiors_disjoint(decomposition),
        "distance_lower_bound": lower,
        "distance_upper_bound": upper,
        "max_overlap": max_overlap,
        "overlap_ok": max_overlap <= OVERLAP_BOUND,
        "overlap_review": max_overlap > OVERLAP_REVIEW,
        "collar": decomposition.collar,
        "collar_covered": bool(np.all(cover)),
    }


def _covered(decomposition: WhitneyDecomposition, pts: np.ndarray) -> np.ndarray:
    if pts.size == 0:
        return np.ones(0, dtype=bool)
    anchors, sides = decomposition.anchors, decomposition.sides
    hit = np.zeros(pts.size, dtype=bool)
    for start in range(0, pts.size, 2048):
        p = pts[start:start + 2048, None]
        x, y = p.real - anchors.real, p.imag - anchors.imag
        hit[start:start + 2048] = ((x >= 0) & (x <= sides) & (y >= 0) & (y <= sides)).any(axis=1)
    return hit


# --- named domains ---------------------------------------------------------

def unit_square() -> Polygon:
    return Polygon([0, 1, 1 + 1j, 1j])


def l_shape() -> Polygon:
    """Hexagon ``0, 2, 2+i, 1+i, 1+2i, 2i`` with a reentrant corner at ``1+i``."""
    return Polygon([0, 2, 2 + 1j, 1 + 1j, 1 + 2j, 2j])


def regular_polygon(n: int, radius: float = 1.0) -> Polygon:
    k = np.arange(n)
    return Polygon(radius * np.exp(2j * np.pi * k / n))


def equilateral_triangle() -> Polygon:
    return regular_polygon(3)


def random_star_polygon(n: int, seed: int = 0, min_turn: float = 0.05) -> Polygon:
    """Random simple star-shaped polygon about the origin."""
    rng = np.random.default_rng(seed)
    for _ in range(1000):
        theta = np.sort(rng.uniform(0, 2 * np.pi, n))
        gaps = np.diff(np.concatenate([theta, theta[:1] + 2 * np.pi]))
        if gaps.min() < min(0.3, 2.1 / n):
            continue
        r = rng.uniform(0.5, 1.5, n)
        w = r * np.exp(1j * theta)
        try:
            poly = Polygon(w)
        except GeometryError:
            continue
        if np.min(np.abs(poly.angle_factors - 1)) > min_turn:
            return poly
    raise GeometryError("could not draw a random polygon")


def notched_square(alpha: float) -> Polygon:
    """Square ``[-1, 1]^2`` with a wedge cut from the top edge down to the origin.

    The apex at the origin is vertex 0 and has angle factor ``alpha``; the
    wedge reaches the top corners at ``alpha = 3/2``, so ``alpha`` must lie
    in ``(3/2, 2)``.  All other angles are outward.
    """
    if not 1.5 < alpha < 2:
        raise GeometryError("notch angle factor must lie in (3/2, 2)")
    a = math.tan((2 - alpha) * math.pi / 2)
    return Polygon([0, -a + 1j, -1 + 1j, -1 - 1j, 1 - 1j, 1 + 1j, a + 1j])


NAMED_POLYGONS = {
    "unit-square": unit_square,
    "l-shape": l_shape,
    "triangle": equilateral_triangle,
}


def named_polygon(name: str) -> Polygon:
    if name in NAMED_POLYGONS:
        return NAMED_POLYGONS[name]()
    if name.startswith("notch-"):
        return notched_square(float(name.split("-", 1)[1]))
    if name.startswith("regular-"):
        return regular_polygon(int(name.split("-", 1)[1]))
    if name.startswith("random-"):
        parts = name.split("-")
        seed = int(parts[2]) if len(parts) > 2 else 0
        return random_star_polygon(int(parts[1]), seed)
    raise KeyError(f"unknown polygon {name!r}")


def polygon_from_points(points: Iterable[Sequence[float]]) -> Polygon:
    return Polygon(np.asarray(list(points), dtype=float))
