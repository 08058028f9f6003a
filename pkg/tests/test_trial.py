from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

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
    sample_response,
)


def test_new_trial_empty_state():
    s = new_trial(Bernoulli(0.9, 0.7))
    assert s.n == 0 and s.n1 == 0 and s.n2 == 0
    assert s.assignments == () and s.outcomes == ()
    g = new_trial(Gaussian(0.0, 0.0, 1.0, 1.0))
    assert g.n == 0


@pytest.mark.parametrize("bad", [(1.0, 0.5), (0.5, 0.0), (-0.1, 0.5), (0.5, 1.2)])
def test_bernoulli_rejects_boundary_probabilities(bad):
    with pytest.raises(TrialError):
        Bernoulli(*bad)


@pytest.mark.parametrize("taus", [(0.0, 1.0), (1.0, -2.0)])
def test_gaussian_rejects_nonpositive_stddev(taus):
    with pytest.raises(TrialError):
        Gaussian(0.0, 0.0, *taus)


def test_assignment_counters():
    s = new_trial(Bernoulli(0.9, 0.7))
    s = apply_assignment(s, 1)
    assert (s.n, s.n1, s.n2) == (1, 1, 0)
    for _ in range(2):
        s = apply_assignment(s, 2)
    s = apply_assignment(s, 1)
    s = apply_assignment(s, 1)
    assert (s.n, s.n1, s.n2) == (5, 3, 2)
    s = apply_assignment(s, 2)
    assert (s.n, s.n1, s.n2) == (6, 3, 3)


def test_outcome_updates_sums():
    s = new_trial(Bernoulli(0.9, 0.7))
    s = apply_assignment(s, 1)
    s = apply_assignment(s, 2)
    s = apply_outcome(s, 1, BinaryOutcome(True))
    assert s.sums == (1.0, 0.0) and s.responded == (1, 0)
    s = apply_outcome(s, 2, BinaryOutcome(False))
    assert s.sums == (1.0, 0.0) and s.responded == (1, 1)


def test_duplicate_outcome_rejected():
    s = apply_assignment(new_trial(Bernoulli(0.5, 0.5)), 1)
    s = apply_outcome(s, 1, BinaryOutcome(True))
    with pytest.raises(TrialError):
        apply_outcome(s, 1, BinaryOutcome(True))


def test_unknown_patient_rejected():
    s = new_trial(Bernoulli(0.5, 0.5))
    with pytest.raises(TrialError):
        apply_outcome(s, 99, BinaryOutcome(True))


def test_variant_mismatch_rejected():
    s = apply_assignment(new_trial(Bernoulli(0.5, 0.5)), 1)
    with pytest.raises(TrialError):
        apply_outcome(s, 1, ContinuousOutcome(1.0))
    g = apply_assignment(new_trial(Gaussian(0, 0, 1, 1)), 1)
    with pytest.raises(TrialError):
        apply_outcome(g, 1, BinaryOutcome(True))


def test_gaussian_outcome_sums():
    s = new_trial(Gaussian(0, 0, 1, 1))
    s = apply_assignment(s, 2)
    s = apply_outcome(s, 1, ContinuousOutcome(3.0))
    assert s.sums == (0.0, 3.0) and s.sumsq == (0.0, 9.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([1, 2]), st.booleans()), max_size=60))
def test_state_invariants_hold_after_every_mutation(steps):
    s = new_trial(Bernoulli(0.6, 0.4))
    for arm, respond in steps:
        s = apply_assignment(s, arm)
        patient = s.n
        if respond:
            s = apply_outcome(s, patient, BinaryOutcome(arm == 1))
        assert s.n1 + s.n2 == s.n
        assert s.n1 == sum(1 for a in s.assignments if a == 1)
        assert len(s.outcomes) == s.n
        assert s.responded[0] + s.responded[1] == sum(o is not None for o in s.outcomes)
        assert 0.0 <= s.sums[0] <= s.responded[0]
        assert 0.0 <= s.sums[1] <= s.responded[1]


def test_replay_is_bit_identical():
    steps = [(1, True), (2, False), (1, True), (1, False), (2, True)]

    def run():
        stream = RandomStream(11, 0)
        s = new_trial(Gaussian(0.5, -0.5, 1.0, 2.0))
        for arm, respond in steps:
            s = apply_assignment(s, arm)
            out = sample_response(s.model, arm, stream)
            if respond:
                s = apply_outcome(s, s.n, out)
        return s

    assert run() == run()


def test_sample_response_determinism_and_degenerate_limit():
    s1 = RandomStream(5, 1)
    s2 = RandomStream(5, 1)
    m = Bernoulli(0.9, 0.7)
    assert sample_response(m, 1, s1) == sample_response(m, 1, s2)

    near_one = Bernoulli(1 - 1e-9, 0.5)
    stream = RandomStream(5, 2)
    hits = sum(sample_response(near_one, 1, stream).success for _ in range(10_000))
    assert hits == 10_000


def test_gaussian_sample_mean_clt_bound():
    stream = RandomStream(5, 3)
    m = Gaussian(0.0, 10.0, 1.0, 1.0)
    n = 100_000
    total = sum(sample_response(m, 1, stream).value for _ in range(n))
    # 4 sigma / sqrt(n) with sigma = 1.
    assert abs(total / n) < 4.0 / n**0.5


def test_pending_tracking():
    s = new_trial(Bernoulli(0.5, 0.5))
    s = apply_assignment(s, 1)
    s = apply_assignment(s, 2)
    assert s.pending() == (1, 2)
    s = apply_outcome(s, 1, BinaryOutcome(True))
    assert s.pending() == (2,)
