from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptrand.designs import (
    CompleteRandomization,
    Dbcd,
    DesignConfig,
    DesignError,
    DropTheLoser,
    EfronCoin,
    Erade,
    ModifiedPlayTheWinner,
    PlayTheWinner,
    UrnState,
    burn_in_probability,
    dbcd_probability,
    dl_draw,
    dl_update,
    efron_probability,
    erade_probability,
    format_design,
    next_probability,
    parse_design,
    rpw_draw,
    rpw_update,
    validate_design_for_model,
)
from adaptrand.estimators import BinaryEstimates
from adaptrand.rng import RandomStream
from adaptrand.targets import TargetAllocation
from adaptrand.trial import Bernoulli, Gaussian, apply_assignment, apply_outcome, new_trial, BinaryOutcome


# ---------------------------------------------------------------------------
# Coin probability functions
# ---------------------------------------------------------------------------


def test_erade_three_branches():
    assert erade_probability(0.5, 0.6, 7, 10) == pytest.approx(0.30)
    assert erade_probability(0.5, 0.6, 3, 10) == pytest.approx(0.80)
    assert erade_probability(0.5, 0.6, 6, 10) == 0.6


def test_erade_alpha_zero_is_deterministic_correction():
    assert erade_probability(0.0, 0.6, 7, 10) == 0.0
    assert erade_probability(0.0, 0.6, 3, 10) == 1.0


def test_erade_returns_only_the_three_values():
    for alpha in (0.0, 0.25, 0.5, 2 / 3):
        for rho in (0.21, 0.5, 0.847):
            for m in range(0, 40):
                allowed = {alpha * rho, rho, 1.0 - alpha * (1.0 - rho)}
                for n1 in range(m + 1):
                    assert erade_probability(alpha, rho, n1, m) in allowed


def test_erade_directional_ethics():
    for m in range(1, 30):
        for n1 in range(m + 1):
            rho = 0.613
            p = erade_probability(0.5, rho, n1, m)
            if n1 / m > rho:
                assert p < rho
            elif n1 / m < rho:
                assert p > rho


def test_erade_domain_errors():
    with pytest.raises(DesignError):
        erade_probability(1.0, 0.5, 1, 2)
    with pytest.raises(DesignError):
        erade_probability(0.5, 0.0, 1, 2)
    with pytest.raises(DesignError):
        erade_probability(0.5, 0.5, 3, 2)


def test_efron_published_branches():
    assert efron_probability(2 / 3, 4, 10) == pytest.approx(2 / 3)
    assert efron_probability(2 / 3, 5, 10) == 0.5
    assert efron_probability(2 / 3, 6, 10) == pytest.approx(1 / 3)


def test_efron_equals_erade_with_half_target_exhaustively():
    # Every (n1, m) with m <= 200.
    for alpha in (0.5, 2 / 3):
        for m in range(201):
            for n1 in range(m + 1):
                assert efron_probability(alpha, n1, m) == erade_probability(alpha, 0.5, n1, m)


def test_tie_branch_exact_for_half_target():
    for m in range(0, 400, 2):
        assert erade_probability(0.5, 0.5, m // 2, m) == 0.5
        if m >= 2:
            assert erade_probability(0.5, 0.5, m // 2 + 1, m) != 0.5


def test_dbcd_fixed_point_and_boundaries():
    for gamma in (0.0, 1.0, 2.0, 7.5):
        assert dbcd_probability(gamma, 0.6, 0.6) == pytest.approx(0.6, abs=1e-15)
    assert dbcd_probability(2.0, 0.6, 0.0) == 1.0
    assert dbcd_probability(2.0, 0.6, 1.0) == 0.0


def test_dbcd_published_value():
    # 0.864 / (0.864 + 0.256), evaluated independently.
    assert dbcd_probability(2.0, 0.6, 0.5) == pytest.approx(0.864 / 1.12, rel=1e-12)


def test_dbcd_gamma_zero_returns_target():
    for x in (0.1, 0.35, 0.9):
        assert dbcd_probability(0.0, 0.6, x) == pytest.approx(0.6, abs=1e-15)


def test_dbcd_continuity_on_dense_grid():
    gamma, rho = 2.0, 0.6
    xs = [i / 100_000 for i in range(1, 100_000)]
    prev = dbcd_probability(gamma, rho, xs[0])
    max_jump = 0.0
    for x in xs[1:]:
        cur = dbcd_probability(gamma, rho, x)
        max_jump = max(max_jump, abs(cur - prev))
        prev = cur
    assert max_jump < 1e-3  # continuous; contrast with the discrete rule's jump at x = rho


def test_arm_swap_symmetry_of_coin_rules():
    # Relabeling arms maps p to 1 - p.
    for m in range(1, 60):
        for n1 in range(m + 1):
            p = erade_probability(0.5, 0.613, n1, m)
            q = erade_probability(0.5, 1 - 0.613, m - n1, m)
            assert p == pytest.approx(1.0 - q, abs=1e-12)
            pd = dbcd_probability(2.0, 0.613, n1 / m)
            qd = dbcd_probability(2.0, 1 - 0.613, (m - n1) / m)
            assert pd == pytest.approx(1.0 - qd, abs=1e-12)


# ---------------------------------------------------------------------------
# Urn mechanics
# ---------------------------------------------------------------------------


def test_dl_draw_immigration_adds_both_types():
    urn = UrnState(5, 5, 1)
    # Find a uniform that hits the immigration ball: pick in [10, 11).
    stream = RandomStream(0, 0)
    seen_immigration = False
    for _ in range(200):
        arm, after = dl_draw(urn, stream)
        if arm is None:
            assert after == UrnState(6, 6, 1)
            seen_immigration = True
            break
    assert seen_immigration


def test_dl_draw_treatment_ball_removed():
    urn = UrnState(5, 5, 1)
    stream = RandomStream(1, 0)
    arm, after = dl_draw(urn, stream)
    if arm == 1:
        assert after == UrnState(4, 5, 1)
    elif arm == 2:
        assert after == UrnState(5, 4, 1)


def test_dl_immigration_probability():
    urn = UrnState(5, 5, 1)
    hits = 0
    reps = 200_000
    stream = RandomStream(7, 0)
    for _ in range(reps):
        arm, _ = dl_draw(urn, stream)
        hits += arm is None
    assert hits / reps == pytest.approx(1 / 11, abs=0.003)


def test_dl_update_success_restores_failure_drops():
    pending = UrnState(4, 5, 1)
    assert dl_update(pending, 1, True) == UrnState(5, 5, 1)
    assert dl_update(pending, 1, False) == UrnState(4, 5, 1)


def test_dl_counts_never_negative():
    with pytest.raises(DesignError):
        UrnState(-1, 5, 1)


def test_rpw_draw_and_update():
    urn = UrnState(1, 1)
    assert rpw_update(urn, 1, True) == UrnState(2, 1)
    assert rpw_update(urn, 1, False) == UrnState(1, 2)
    assert rpw_update(urn, 2, True) == UrnState(1, 2)
    assert rpw_update(urn, 2, False) == UrnState(2, 1)


def test_rpw_total_grows_by_one_per_response():
    urn = UrnState(1, 1)
    stream = RandomStream(3, 0)
    for i in range(50):
        arm = rpw_draw(urn, stream)
        urn = rpw_update(urn, arm, stream.uniform() < 0.5)
        assert urn.balls1 + urn.balls2 == 2 + i + 1


def test_empty_urn_draw_rejected():
    with pytest.raises(DesignError):
        rpw_draw(UrnState(0, 0), RandomStream(0, 0))
    with pytest.raises(DesignError):
        dl_draw(UrnState(0, 0, 0), RandomStream(0, 0))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_urn_invariants_random_walk(seed):
    # DL: immigration count constant, treatment counts never negative.
    stream = RandomStream(seed, 0)
    urn = UrnState(5, 5, 1)
    for _ in range(400):
        arm, urn = dl_draw(urn, stream)
        assert urn.immigration == 1
        assert urn.balls1 >= 0 and urn.balls2 >= 0
        if arm is not None:
            urn = dl_update(urn, arm, stream.uniform() < 0.3)
    # RPW: total count law.
    urn = UrnState(1, 1)
    responses = 0
    for _ in range(400):
        arm = rpw_draw(urn, stream)
        urn = rpw_update(urn, arm, stream.uniform() < 0.5)
        responses += 1
        assert urn.balls1 + urn.balls2 == 2 + responses


# ---------------------------------------------------------------------------
# DesignConfig and dispatch
# ---------------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(DesignError):
        Erade(alpha=1.0)
    with pytest.raises(DesignError):
        Dbcd(gamma=-0.1)
    with pytest.raises(DesignError):
        DesignConfig(rule=Erade(0.5))  # missing target
    with pytest.raises(DesignError):
        DesignConfig(rule=PlayTheWinner(), target=TargetAllocation("urn"))
    with pytest.raises(DesignError):
        DesignConfig(rule=Erade(0.5), target=TargetAllocation("urn"), m0=0)


def test_model_compatibility_checks():
    urn_design = DesignConfig(rule=DropTheLoser())
    with pytest.raises(DesignError):
        validate_design_for_model(urn_design, Gaussian(0, 0, 1, 1))
    binary_target = DesignConfig(rule=Erade(0.5), target=TargetAllocation("urn"))
    with pytest.raises(DesignError):
        validate_design_for_model(binary_target, Gaussian(0, 0, 1, 1))
    gauss_target = DesignConfig(rule=Erade(0.5), target=TargetAllocation("neyman-gaussian"))
    with pytest.raises(DesignError):
        validate_design_for_model(gauss_target, Bernoulli(0.5, 0.5))


def test_burn_in_block_probabilities():
    design = DesignConfig(rule=Erade(0.5), target=TargetAllocation("urn"), m0=2)
    assert burn_in_probability(design, 0, 0) == 0.5
    assert burn_in_probability(design, 1, 1) == pytest.approx(1 / 3)
    assert burn_in_probability(design, 2, 2) == 0.0
    assert burn_in_probability(design, 3, 2) == 0.0
    assert burn_in_probability(design, 3, 1) == 1.0


def test_next_probability_composition():
    design = DesignConfig(rule=Erade(0.5), target=TargetAllocation("fixed", rho0=0.5), m0=2)
    state = new_trial(Bernoulli(0.5, 0.5))
    assert next_probability(design, state) == 0.5  # first burn-in slot
    for arm in (1, 1, 2, 2):
        state = apply_assignment(state, arm)
        state = apply_outcome(state, state.n, BinaryOutcome(arm == 1))
    # Past burn-in, balanced at the fixed target: tie branch.
    assert next_probability(design, state, BinaryEstimates(0.5, 0.5)) == 0.5


def test_next_probability_dbcd_matches_callable():
    design = DesignConfig(rule=Dbcd(2.0), target=TargetAllocation("urn"), m0=2)
    state = new_trial(Bernoulli(0.9, 0.7))
    for arm in (1, 1, 2, 2):
        state = apply_assignment(state, arm)
        state = apply_outcome(state, state.n, BinaryOutcome(True))
    est = BinaryEstimates(0.6, 0.4)
    from adaptrand.targets import BinaryParams, evaluate

    rho = evaluate(TargetAllocation("urn"), BinaryParams(0.6, 0.4))
    assert next_probability(design, state, est) == dbcd_probability(2.0, rho, 0.5)


def test_next_probability_rejects_urn_rules():
    design = DesignConfig(rule=DropTheLoser())
    with pytest.raises(DesignError):
        next_probability(design, new_trial(Bernoulli(0.5, 0.5)))


def test_parse_format_round_trip():
    cases = [
        ("erade:0.5", "urn"),
        ("efron:0.6666666666666666", None),
        ("dbcd:2.0", "rsihr"),
        ("dl:5,5,1", None),
        ("rpw:1,1", None),
        ("mrpw:2,1,1", None),
        ("cr:0.5", None),
    ]
    for text, target in cases:
        design = parse_design(text, target=target)
        assert parse_design(format_design(design), target=target) == design


def test_parse_design_defaults_and_errors():
    d = parse_design("erade", target="urn")
    assert isinstance(d.rule, Erade) and d.rule.alpha == 0.5
    d = parse_design("mrpw:3,2,2")
    assert isinstance(d.rule, ModifiedPlayTheWinner) and d.m0 == 3 and d.rule.balls1 == 2
    with pytest.raises(DesignError):
        parse_design("nope")
    with pytest.raises(DesignError):
        parse_design("erade:x", target="urn")
    # Non-adaptive rules silently drop an irrelevant target argument.
    d = parse_design("cr:1.0", target="urn")
    assert d.target is None and isinstance(d.rule, CompleteRandomization)


def test_complete_randomization_bounds():
    assert CompleteRandomization(1.0).p == 1.0
    with pytest.raises(DesignError):
        CompleteRandomization(1.5)
