from __future__ import annotations

from fractions import Fraction

import pytest

from adaptrand.estimators import (
    VAR_FLOOR_SCALE,
    GaussianEstimates,
    binary_estimates,
    gaussian_estimates,
    shrunk_mean,
)
from adaptrand.rng import RandomStream
from adaptrand.trial import (
    Bernoulli,
    BinaryOutcome,
    ContinuousOutcome,
    Gaussian,
    TrialError,
    apply_assignment,
    apply_outcome,
    new_trial,
)


def _binary_state(successes1, total1, successes2, total2):
    s = new_trial(Bernoulli(0.5, 0.5))
    for arm, succ, tot in ((1, successes1, total1), (2, successes2, total2)):
        for i in range(tot):
            s = apply_assignment(s, arm)
            s = apply_outcome(s, s.n, BinaryOutcome(i < succ))
    return s


def _gaussian_state(obs1, obs2):
    s = new_trial(Gaussian(0, 0, 1, 1))
    for arm, values in ((1, obs1), (2, obs2)):
        for v in values:
            s = apply_assignment(s, arm)
            s = apply_outcome(s, s.n, ContinuousOutcome(v))
    return s


def test_shrunk_mean_exact_values():
    assert shrunk_mean(0, 0, 0.5) == 0.5
    assert shrunk_mean(7, 10, 0.5) == pytest.approx(float(Fraction(15, 2) / 11), abs=0)
    with pytest.raises(TrialError):
        shrunk_mean(1, -1, 0.5)


def test_shrunk_mean_limit():
    # (k c + 0.5) / (k + 1) -> c; exact-rational oracle at k = 1e6, c = 0.3.
    k, c = 10**6, 0.3
    exact = Fraction(k) * Fraction(3, 10) + Fraction(1, 2)
    exact /= Fraction(k + 1)
    assert abs(float(exact) - c) < 1e-6
    assert shrunk_mean(k * c, k, 0.5) == pytest.approx(float(exact), rel=1e-12)


def test_binary_estimates_zero_data_returns_prior():
    est = binary_estimates(new_trial(Bernoulli(0.9, 0.7)))
    assert (est.p1, est.p2) == (0.5, 0.5)


def test_binary_estimates_formula():
    est = binary_estimates(_binary_state(9, 10, 7, 10))
    assert est.p1 == pytest.approx(9.5 / 11, abs=1e-15)
    assert est.p2 == pytest.approx(7.5 / 11, abs=1e-15)


def test_binary_estimates_boundary_protection():
    est = binary_estimates(_binary_state(0, 4, 4, 4))
    assert est.p1 == pytest.approx(0.1, abs=1e-15)
    assert 0.0 < est.p1 < 1.0 and 0.0 < est.p2 < 1.0


def test_binary_estimates_open_interval_bounds():
    for succ in range(5):
        est = binary_estimates(_binary_state(succ, 4, 0, 0))
        n = 4
        assert 0.5 / (n + 1) <= est.p1 <= (n + 0.5) / (n + 1)


def test_binary_estimates_variant_mismatch():
    with pytest.raises(TrialError):
        binary_estimates(new_trial(Gaussian(0, 0, 1, 1)))


def test_gaussian_estimates_two_point():
    est = gaussian_estimates(_gaussian_state([1.0, 3.0], [0.0]))
    assert est.mu1 == 2.0 and est.var1 == pytest.approx(1.0, abs=1e-12)


def test_gaussian_estimates_exact_rational():
    # observations {0,0,0,4}: mean 1, MLE variance (16/4) - 1 = 3.
    exact_mu = Fraction(4, 4)
    exact_var = Fraction(16, 4) - exact_mu**2
    est = gaussian_estimates(_gaussian_state([0.0, 0.0, 0.0, 4.0], [1.0]))
    assert est.mu1 == float(exact_mu)
    assert est.var1 == pytest.approx(float(exact_var), abs=1e-12)


def test_gaussian_estimates_single_observation_floor():
    est = gaussian_estimates(_gaussian_state([7.0], [1.0]))
    assert est.mu1 == 7.0
    assert est.var1 == VAR_FLOOR_SCALE * 49.0


def test_gaussian_estimates_initial_fallback():
    initial = GaussianEstimates(mu1=0.3, mu2=-0.3, var1=2.0, var2=3.0)
    est = gaussian_estimates(new_trial(Gaussian(0, 0, 1, 1)), initial)
    assert est == initial
    est = gaussian_estimates(_gaussian_state([1.0, 3.0], []), initial)
    assert est.mu1 == 2.0 and (est.mu2, est.var2) == (-0.3, 3.0)


def test_gaussian_estimates_variant_mismatch():
    with pytest.raises(TrialError):
        gaussian_estimates(new_trial(Bernoulli(0.5, 0.5)))


def test_binary_consistency_statistical():
    # i.i.d. assignment with fixed success probabilities: the shrunk
    # estimate converges; at 1e4 observations per arm, |error| < 0.02
    # in at least 99% of 200 replications.
    p1, p2 = 0.3, 0.8
    good = 0
    for rep in range(200):
        stream = RandomStream(1717, rep)
        u = stream.uniforms(20_000)
        s1 = float((u[:10_000] < p1).sum())
        s2 = float((u[10_000:] < p2).sum())
        p1_hat = shrunk_mean(s1, 10_000, 0.5)
        p2_hat = shrunk_mean(s2, 10_000, 0.5)
        good += abs(p1_hat - p1) < 0.02 and abs(p2_hat - p2) < 0.02
    assert good >= 198
