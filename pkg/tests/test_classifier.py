from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sctoeplitz.classifier import (ClassifierDomainError, NoWeightedRegime, alpha_threshold, classify, exact,
                                   main1_hypothesis, projection_bounded, regime, unbounded_p_range,
                                   weighted_exponent_threshold)


def test_worked_cases():
    assert projection_bounded(3, 1.99)
    assert projection_bounded(5, 1.5)
    assert not projection_bounded(5, 1.8)
    assert not projection_bounded(1.2, 1.9)


def test_partial_sum_hypothesis_cases():
    assert main1_hypothesis(2, 1.999)
    assert main1_hypothesis(5, 1.6)
    assert not main1_hypothesis(1.25, 1.7)
    assert alpha_threshold(Fraction(5, 4)) == Fraction(5, 3)
    assert alpha_threshold(3) is None


def test_weighted_thresholds():
    assert weighted_exponent_threshold(6, 1.8) == Fraction(6, 5)
    assert weighted_exponent_threshold(1.1, 1.95) == Fraction(131, 200)
    assert weighted_exponent_threshold(5, "5/3") == 0
    with pytest.raises(NoWeightedRegime):
        weighted_exponent_threshold(2, 1.9)
    with pytest.raises(NoWeightedRegime):
        weighted_exponent_threshold(5, 1.5)


def test_boundary_cases_are_unbounded():
    # equality in the strict inequality must come out unbounded
    assert not projection_bounded(5, "5/3")
    assert projection_bounded(5, Fraction(5, 3) - Fraction(1, 10**9))
    assert not projection_bounded(Fraction(18, 14), 1.8)


def test_domain_errors():
    with pytest.raises(ClassifierDomainError):
        projection_bounded(1, 1.5)
    with pytest.raises(ClassifierDomainError):
        projection_bounded(3, 2)
    with pytest.raises(ClassifierDomainError):
        classify(0.5, 1.2)


def test_exact_conversion():
    assert exact(0.1) == Fraction(1, 10)
    assert exact("5/3") == Fraction(5, 3)
    assert exact(3) == Fraction(3)


def test_regimes():
    assert regime(5) == "p>4"
    assert regime(1.2) == "p<4/3"
    assert regime(4) == "no-restriction"
    assert regime("4/3") == "no-restriction"


def test_unbounded_range():
    lo, hi = unbounded_p_range(1.8)
    assert lo == Fraction(18, 14) and hi == Fraction(9, 2)
    assert unbounded_p_range(0.9) == (None, None)


def test_classify_report():
    v = classify(1.2, 1.9, weighted=True)
    assert v.projection_bounded is False and v.main1_hypothesis is False
    assert v.t_min == "8/25" and v.alpha_threshold == "3/2"
    assert set(v.to_json()) == {"p", "alpha_max", "projection_bounded", "main1_hypothesis", "regime",
                                "alpha_threshold", "t_min"}


def test_grid_scan_agrees_with_closed_form():
    ps = np.linspace(1.01, 8.0, 100)
    alphas = np.linspace(0.02, 1.99, 100)
    for p in ps:
        for a in alphas:
            got = projection_bounded(p, a)
            if a <= 1:
                expect = True
            else:
                expect = 2 * a / (a + 1) < p < 2 + 2 / (a - 1)
            assert got == expect, (p, a)
            if main1_hypothesis(p, a):
                assert got


@given(st.fractions(Fraction(101, 100), 10), st.fractions(Fraction(1, 100), Fraction(199, 100)),
       st.fractions(Fraction(1, 100), Fraction(199, 100)))
def test_antitone_in_alpha(p, a1, a2):
    lo, hi = sorted((a1, a2))
    if p > 2 and projection_bounded(p, hi):
        assert projection_bounded(p, lo)


@given(st.fractions(Fraction(101, 100), 10), st.fractions(Fraction(101, 100), Fraction(199, 100)))
def test_unbounded_range_matches_predicate(p, a):
    lo, hi = unbounded_p_range(a)
    assert projection_bounded(p, a) == (lo < p < hi)
