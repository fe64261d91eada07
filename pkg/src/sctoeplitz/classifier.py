"""Exact boundedness criteria for the Bergman projection of a polygon.

Everything depends only on the exponent ``p`` and the largest angle factor
``alpha_max`` of the polygon.  Inputs are converted to
:class:`fractions.Fraction` (floats through their shortest decimal
representation, strings such as ``"5/3"`` verbatim), so that the strict
inequalities are decided exactly and boundary cases come out unbounded.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

ONE = Fraction(1)
TWO = Fraction(2)
P_LOW = Fraction(4, 3)
P_HIGH = Fraction(4)


class ClassifierDomainError(ValueError):
    pass


class NoWeightedRegime(ValueError):
    pass


def exact(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(repr(float(x)))


def _check(p, alpha_max) -> tuple[Fraction, Fraction]:
    p, a = exact(p), exact(alpha_max)
    if not p > 1:
        raise ClassifierDomainError(f"p must exceed 1, got {p}")
    if not 0 < a < 2:
        raise ClassifierDomainError(f"alpha_max must lie in (0, 2), got {a}")
    return p, a


def projection_bounded(p, alpha_max) -> bool:
    """Bounded on ``L^p`` iff ``(p-2)(a-1) < 2`` (``p >= 2``) or ``(2-p)(a-1) < 2(p-1)`` (``p <= 2``).

    The same predicate decides boundedness of the disk projection on the
    weighted space with weight ``|psi'|^(2-p)``, since the two are
    equivalent through the change of variables.
    """
    p, a = _check(p, alpha_max)
    if p >= 2:
        return (p - 2) * (a - 1) < 2
    return (2 - p) * (a - 1) < 2 * (p - 1)


weighted_disk_projection_bounded = projection_bounded


def alpha_threshold(p) -> Fraction | None:
    """Largest admissible ``alpha_max`` (exclusive) for convergent partial sums; ``None`` means no restriction."""
    p = exact(p)
    if p > P_HIGH:
        return 1 + TWO / (p - 2)
    if p < P_LOW:
        return 1 + 2 * (p - 1) / (2 - p)
    return None


def main1_hypothesis(p, alpha_max) -> bool:
    """No restriction for ``4/3 <= p <= 4``; otherwise ``alpha_max`` below :func:`alpha_threshold`."""
    p, a = _check(p, alpha_max)
    thr = alpha_threshold(p)
    return True if thr is None else a < thr


def regime(p) -> str:
    p = exact(p)
    if p > P_HIGH:
        return "p>4"
    if p < P_LOW:
        return "p<4/3"
    return "no-restriction"


def weighted_exponent_threshold(p, alpha_max) -> Fraction:
    """Open lower bound for ``t`` in the weighted symbol condition.

    ``(p-2)(a-1) - 2`` for ``p > 4`` and ``(2-p)(a-1) - 2(p-1)`` for
    ``1 < p < 4/3``.  Only meaningful when ``alpha_max`` is at or above
    :func:`alpha_threshold`; below it the bound would be negative and a
    :class:`NoWeightedRegime` error is raised.
    """
    p, a = _check(p, alpha_max)
    if P_LOW <= p <= P_HIGH:
        raise NoWeightedRegime("no weighted regime applies for 4/3 <= p <= 4")
    t = (p - 2) * (a - 1) - 2 if p > P_HIGH else (2 - p) * (a - 1) - 2 * (p - 1)
    if t < 0:
        raise NoWeightedRegime(f"alpha_max {a} is below the threshold {alpha_threshold(p)}; no weight is needed")
    return t


def unbounded_p_range(alpha_max) -> tuple[Fraction | None, Fraction | None]:
    """``(p_low, p_high)`` with the projection unbounded exactly for ``p <= p_low`` or ``p >= p_high``.

    ``None`` entries mean the corresponding side is empty (``alpha_max <= 1``).
    """
    a = exact(alpha_max)
    if a <= 1:
        return None, None
    return 2 * a / (a + 1), 2 + TWO / (a - 1)


@dataclass(frozen=True)
class BoundednessVerdict:
    p: float
    alpha_max: float
    projection_bounded: bool
    main1_hypothesis: bool
    regime: str
    alpha_threshold: str | None
    t_min: str | None

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "alpha_max": self.alpha_max,
            "projection_bounded": self.projection_bounded,
            "main1_hypothesis": self.main1_hypothesis,
            "regime": self.regime,
            "alpha_threshold": self.alpha_threshold,
            "t_min": self.t_min,
        }


def classify(p, alpha_max, weighted: bool = False) -> BoundednessVerdict:
    pe, ae = _check(p, alpha_max)
    thr = alpha_threshold(pe)
    t_min = None
    if weighted:
        t_min = str(weighted_exponent_threshold(pe, ae))
    return BoundednessVerdict(float(pe), float(ae), projection_bounded(pe, ae), main1_hypothesis(pe, ae),
                              regime(pe), None if thr is None else str(thr), t_min)
