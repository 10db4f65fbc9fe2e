"""Acquisition weights and tempered without-replacement selection."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncprior import (
    AcquisitionConfig,
    Prediction,
    PredictionBatch,
    information_gain_weight,
    make_rng,
    pool_weights,
    sample_acquisition,
)


def _pred(ep=0.0, al=1.0, ood=None):
    return Prediction(mean=0.0, epistemic_variance=ep, aleatoric_variance=al,
                      ood_probability=ood)


# --------------------------------------------------------------- weights

def test_weight_without_epistemic_signal_is_one():
    assert information_gain_weight(_pred(ep=0.0, al=2.7), "bbb", tau=0.5) == 1.0


def test_weight_hand_value():
    # ep = al = 1, tau = 0.5 -> (1 + 1)^2 = 4
    w = information_gain_weight(_pred(ep=1.0, al=1.0), "bbb_ncp", tau=0.5)
    assert abs(w - 4.0) < 1e-12


def test_weight_monotone_in_epistemic_variance():
    ws = [information_gain_weight(_pred(ep=e, al=0.5), "bbb", tau=0.5)
          for e in (0.0, 0.1, 1.0, 10.0)]
    assert all(b > a for a, b in zip(ws, ws[1:]))


def test_weight_is_scale_invariant_for_ratio_kinds():
    # multiplying both variances by c leaves the bbb-family weight unchanged
    a = information_gain_weight(_pred(ep=0.3, al=0.7), "bbb_ncp", tau=0.5)
    b = information_gain_weight(_pred(ep=3.0, al=7.0), "bbb_ncp", tau=0.5)
    assert abs(a - b) < 1e-12


def test_odc_weight_uses_mixture_excess_variance():
    # pi*sigma_y_sq plays the epistemic role: pi=0.5, sigma_y_sq=2, al=1
    w = information_gain_weight(_pred(al=1.0, ood=0.5), "odc_ncp", tau=0.5,
                                sigma_y_sq=2.0)
    assert abs(w - 4.0) < 1e-12
    assert information_gain_weight(_pred(al=1.0, ood=0.0), "odc_ncp", tau=0.5) == 1.0


def test_det_weight_is_tempered_aleatoric():
    w = information_gain_weight(_pred(al=3.0), "det", tau=0.5)
    assert abs(w - 9.0) < 1e-12
    # the det rule is not scale-free: it ranks by raw predicted noise
    assert information_gain_weight(_pred(al=2.0), "det", tau=1.0) == 2.0


def test_weight_validation():
    with pytest.raises(ValueError):
        information_gain_weight(_pred(al=0.0), "bbb", tau=0.5)
    with pytest.raises(ValueError):
        information_gain_weight(_pred(al=-1.0), "det", tau=0.5)
    with pytest.raises(ValueError):
        information_gain_weight(_pred(), "svi", tau=0.5)
    with pytest.raises(ValueError):
        information_gain_weight(_pred(ood=None), "odc_ncp", tau=0.5)


def test_pool_weights_match_scalar_path():
    preds = PredictionBatch(mean=np.zeros(4),
                            epistemic_variance=np.array([0.0, 0.5, 1.0, 2.0]),
                            aleatoric_variance=np.array([1.0, 0.5, 1.0, 4.0]),
                            ood_probability=None)
    ws = pool_weights(preds, "bbb", tau=0.5)
    for i in range(4):
        one = information_gain_weight(
            _pred(ep=preds.epistemic_variance[i], al=preds.aleatoric_variance[i]),
            "bbb", tau=0.5)
        assert abs(ws[i] - one) < 1e-12


def test_log_space_weights_survive_tiny_tau():
    # ratio^(1/tau) overflows f64 if formed naively; log-space stays finite
    preds = PredictionBatch(mean=np.zeros(2),
                            epistemic_variance=np.array([1e40, 0.0]),
                            aleatoric_variance=np.array([1e-40, 1.0]),
                            ood_probability=None)
    ws = pool_weights(preds, "bbb", tau=0.05)
    assert ws[0] == np.inf and ws[1] == 1.0  # saturates cleanly, no NaN


# -------------------------------------------------------------- selection

def test_selection_basic_contract():
    rng = make_rng(0, 6)
    idx = sample_acquisition(np.ones(10), AcquisitionConfig(batch_k=4), rng)
    assert idx.shape == (4,)
    assert len(set(idx.tolist())) == 4
    assert all(0 <= i < 10 for i in idx)


def test_selection_exhausts_pool():
    idx = sample_acquisition(np.arange(1.0, 6.0), AcquisitionConfig(batch_k=5),
                             make_rng(1, 6))
    assert sorted(idx.tolist()) == [0, 1, 2, 3, 4]


def test_dominant_weight_selected_first():
    # [DERIVED] one weight carries >= 99.99% of the mass
    w = np.full(50, 1e-6)
    w[17] = 1.0
    hits = sum(
        sample_acquisition(w, AcquisitionConfig(batch_k=1), make_rng(s, 6))[0] == 17
        for s in range(1000))
    assert hits >= 999


def test_zero_weight_never_drawn_while_mass_remains():
    w = np.array([1.0, 0.0, 1.0, 0.0, 1.0])
    for s in range(200):
        idx = sample_acquisition(w, AcquisitionConfig(batch_k=3), make_rng(s, 6))
        assert set(idx.tolist()) == {0, 2, 4}


def test_zero_mass_fallback_is_uniform_over_remaining():
    # batch_k exceeds the support: the tail must come from the zero-weight
    # indices, so the draw still returns distinct valid rows
    w = np.array([1.0, 0.0, 0.0, 0.0])
    seen = set()
    for s in range(300):
        idx = sample_acquisition(w, AcquisitionConfig(batch_k=2), make_rng(s, 6))
        assert idx[0] == 0
        assert idx[1] in (1, 2, 3)
        seen.add(int(idx[1]))
    assert seen == {1, 2, 3}


def test_uniform_weights_chi_square():
    # [DERIVED] 1e4 single draws from 4 equal weights; chi^2(3) at the 1%
    # level is 11.345
    counts = np.zeros(4)
    for s in range(10_000):
        counts[sample_acquisition(np.ones(4), AcquisitionConfig(batch_k=1),
                                  make_rng(s, 6))[0]] += 1
    expected = 2500.0
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    assert chi2 < 11.345, f"chi2={chi2}, counts={counts}"


def test_weighted_draw_frequencies():
    # [DERIVED] weights 1:3 -> P(idx 1) = 0.75; binomial 3-sigma band
    hits = sum(
        sample_acquisition(np.array([1.0, 3.0]), AcquisitionConfig(batch_k=1),
                           make_rng(s, 6))[0] == 1
        for s in range(10_000))
    sigma = math.sqrt(10_000 * 0.75 * 0.25)
    assert abs(hits - 7500) < 3 * sigma


def test_positive_scaling_leaves_selection_unchanged():
    w = np.array([0.2, 1.7, 0.01, 3.0, 0.5])
    for s in range(50):
        a = sample_acquisition(w, AcquisitionConfig(batch_k=3), make_rng(s, 6))
        b = sample_acquisition(1e6 * w, AcquisitionConfig(batch_k=3), make_rng(s, 6))
        np.testing.assert_array_equal(a, b)


def test_selection_replays_exactly():
    w = np.array([0.5, 2.0, 1.0, 0.25])
    a = sample_acquisition(w, AcquisitionConfig(batch_k=2), make_rng(9, 6))
    b = sample_acquisition(w, AcquisitionConfig(batch_k=2), make_rng(9, 6))
    np.testing.assert_array_equal(a, b)


def test_selection_consumes_one_uniform_per_draw():
    # the stream position after selecting k must equal k raw uniform draws,
    # regardless of fallback; verified by comparing follow-up values
    w = np.array([1.0, 0.0, 0.0, 2.0])
    for k in (1, 2, 4):
        rng = make_rng(3, 6)
        sample_acquisition(w, AcquisitionConfig(batch_k=k), rng)
        probe = rng.uniform()
        ref = make_rng(3, 6)
        ref.uniform(k)
        assert probe == ref.uniform()


def test_selection_validation():
    cfg = AcquisitionConfig(batch_k=3)
    with pytest.raises(ValueError):
        sample_acquisition(np.ones(2), cfg, make_rng(0, 6))
    with pytest.raises(ValueError):
        sample_acquisition(np.zeros(4), cfg, make_rng(0, 6))
    with pytest.raises(ValueError):
        sample_acquisition(np.array([1.0, -0.1, 1.0]), cfg, make_rng(0, 6))
    with pytest.raises(ValueError):
        sample_acquisition(np.array([1.0, np.nan, 1.0]), cfg, make_rng(0, 6))
    with pytest.raises(ValueError):
        sample_acquisition(np.ones((2, 2)), cfg, make_rng(0, 6))
    with pytest.raises(ValueError):
        AcquisitionConfig(tau=0.0)
    with pytest.raises(ValueError):
        AcquisitionConfig(batch_k=0)


@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(1, 30))
@settings(max_examples=60, deadline=None)
def test_selection_distinct_and_in_range(seed, k, extra):
    n = k + extra - 1
    w = make_rng(seed, 0).uniform(n) + 1e-6
    idx = sample_acquisition(w, AcquisitionConfig(batch_k=min(k, n)), make_rng(seed, 6))
    assert len(set(idx.tolist())) == idx.shape[0]
    assert np.all((0 <= idx) & (idx < n))
