"""Closed-form densities and divergences against quadrature and sampling oracles."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncprior import (
    Gaussian1D,
    bernoulli_log_pmf,
    bernoulli_log_pmf_from_logit,
    kl_normal_normal,
    make_rng,
    normal_log_pdf,
    sigmoid,
    softplus,
    softplus_variance,
)

finite_floats = st.floats(-100.0, 100.0, allow_nan=False)
pos_floats = st.floats(1e-3, 1e3, allow_nan=False)


def test_log_pdf_standard_normal_at_mode():
    assert abs(normal_log_pdf(0.0, Gaussian1D(0.0, 1.0)) - (-0.5 * math.log(2 * math.pi))) < 1e-12
    assert abs(normal_log_pdf(0.0, Gaussian1D(0.0, 1.0)) - (-0.918939)) < 1e-6


def test_log_pdf_one_sigma_out():
    # mode value minus 0.5
    assert abs(normal_log_pdf(1.0, Gaussian1D(0.0, 1.0)) - (-1.418939)) < 1e-6


def test_zero_variance_rejected():
    with pytest.raises(ValueError):
        Gaussian1D(0.0, 0.0)
    with pytest.raises(ValueError):
        Gaussian1D(0.0, -1.0)
    with pytest.raises(ValueError):
        Gaussian1D(float("nan"), 1.0)


def test_log_pdf_normalizes_to_one():
    # [DERIVED] trapezoid quadrature of exp(log_pdf) over +-8 sigma
    for mean, var in ((0.0, 1.0), (2.5, 0.3), (-7.0, 12.0)):
        sd = math.sqrt(var)
        grid = np.linspace(mean - 8 * sd, mean + 8 * sd, 40_001)
        dens = np.exp([normal_log_pdf(float(g), Gaussian1D(mean, var)) for g in grid])
        assert abs(np.trapezoid(dens, grid) - 1.0) < 1e-6


def test_kl_identical_is_exact_zero():
    assert kl_normal_normal(Gaussian1D(0.3, 2.0), Gaussian1D(0.3, 2.0)) == 0.0


def test_kl_closed_form_values():
    assert abs(kl_normal_normal(Gaussian1D(1.0, 1.0), Gaussian1D(0.0, 1.0)) - 0.5) < 1e-12
    expected = 2.0 - 0.5 - math.log(2.0)  # N(0,4) || N(0,1)
    assert abs(kl_normal_normal(Gaussian1D(0.0, 4.0), Gaussian1D(0.0, 1.0)) - expected) < 1e-12
    assert abs(expected - 0.806853) < 1e-6


@given(finite_floats, pos_floats, finite_floats, pos_floats)
@settings(max_examples=200, deadline=None)
def test_kl_nonnegative_property(mp, vp, mq, vq):
    kl = kl_normal_normal(Gaussian1D(mp, vp), Gaussian1D(mq, vq))
    assert kl >= 0.0
    if mp == mq and vp == vq:
        assert kl == 0.0


def test_kl_zero_implies_equal():
    # strictly positive whenever the distributions differ
    assert kl_normal_normal(Gaussian1D(0.0, 1.0), Gaussian1D(1e-4, 1.0)) > 0.0
    assert kl_normal_normal(Gaussian1D(0.0, 1.0), Gaussian1D(0.0, 1.0 + 1e-4)) > 0.0


def test_kl_matches_monte_carlo():
    # [DERIVED] brute-force oracle: KL(p||q) = E_p[ln p - ln q], 1e5 draws
    rng = make_rng(17, 0)
    cases = [(0.5, 1.2, -0.8, 2.0), (2.0, 0.5, 1.0, 1.5), (-1.0, 3.0, -2.0, 0.7)]
    for mp, vp, mq, vq in cases:
        z = mp + math.sqrt(vp) * rng.normal(100_000)
        lp = -0.5 * (np.log(2 * np.pi * vp) + (z - mp) ** 2 / vp)
        lq = -0.5 * (np.log(2 * np.pi * vq) + (z - mq) ** 2 / vq)
        mc = float(np.mean(lp - lq))
        exact = kl_normal_normal(Gaussian1D(mp, vp), Gaussian1D(mq, vq))
        assert abs(mc - exact) / abs(exact) < 0.01


def test_bernoulli_values():
    assert abs(bernoulli_log_pmf(1, 0.5) - math.log(0.5)) < 1e-12
    assert abs(bernoulli_log_pmf(1, 0.9) - math.log(0.9)) < 1e-12
    assert abs(bernoulli_log_pmf(0, 0.9) - math.log(0.1)) < 1e-12


def test_bernoulli_boundary_sentinel_or_error():
    assert bernoulli_log_pmf(1, 0.0) == -math.inf
    assert bernoulli_log_pmf(0, 1.0) == -math.inf
    assert bernoulli_log_pmf(1, 1.0) == 0.0
    with pytest.raises(ValueError):
        bernoulli_log_pmf(1, 0.0, strict=True)


def test_bernoulli_input_validation():
    with pytest.raises(ValueError):
        bernoulli_log_pmf(2, 0.5)
    with pytest.raises(ValueError):
        bernoulli_log_pmf(1, 1.5)
    with pytest.raises(ValueError):
        bernoulli_log_pmf(1, -0.1)


@given(st.integers(0, 1), st.floats(-15.0, 15.0, allow_nan=False))
@settings(max_examples=200, deadline=None)
def test_logit_form_matches_probability_form(o, logit):
    # the probability route itself loses ~eps*e^|logit| of absolute accuracy
    # to cancellation in 1-p, so the cross-check stays in a moderate range
    via_logit = bernoulli_log_pmf_from_logit(o, logit)
    via_prob = bernoulli_log_pmf(o, sigmoid(logit))
    assert math.isclose(via_logit, via_prob, rel_tol=1e-9, abs_tol=1e-12)
    assert math.isfinite(via_logit)


@given(st.integers(0, 1), st.floats(-500.0, 500.0, allow_nan=False))
@settings(max_examples=200, deadline=None)
def test_logit_form_full_range_oracle(o, logit):
    from scipy.special import log_expit

    expected = float(log_expit(logit if o == 1 else -logit))
    got = bernoulli_log_pmf_from_logit(o, logit)
    assert math.isclose(got, expected, rel_tol=1e-12, abs_tol=1e-15)


def test_logit_form_stays_finite_under_saturation():
    assert math.isfinite(bernoulli_log_pmf_from_logit(1, -500.0))
    assert math.isfinite(bernoulli_log_pmf_from_logit(0, 500.0))


def test_softplus_variance_values():
    assert abs(softplus_variance(0.0, floor=1e-6) - (math.log(2.0) + 1e-6)) < 1e-15
    # at raw=50 the softplus part equals 50 to within 1e-12 relative; the
    # added floor then contributes exactly floor/50 = 2e-8 of relative offset
    assert abs((softplus_variance(50.0, floor=1e-6) - 1e-6) - 50.0) / 50.0 < 1e-12
    assert abs(softplus_variance(50.0, floor=1e-6) - 50.0) / 50.0 < 1e-7
    assert abs(softplus_variance(-50.0, floor=1e-6) - 1e-6) < 1e-12
    with pytest.raises(ValueError):
        softplus_variance(0.0, floor=0.0)


@given(st.floats(-700.0, 700.0, allow_nan=False))
@settings(max_examples=200, deadline=None)
def test_softplus_sigmoid_stability(x):
    s = softplus(x)
    assert math.isfinite(s) and s >= 0.0
    p = sigmoid(x)
    assert 0.0 <= p <= 1.0
    # strict > floor holds until the softplus term drops below half an ulp
    # of the floor (raw ~ -51); beyond that the sum rounds to the floor itself
    assert softplus_variance(x) >= 1e-6
    if x > -30.0:
        assert softplus_variance(x) > 1e-6
