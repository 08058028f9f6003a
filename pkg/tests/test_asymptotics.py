from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from adaptrand.asymptotics import (
    crlb,
    dbcd_variance,
    normal_cdf,
    normal_quantile,
    sigma_closed,
    sigma_general,
    urn_variance_squared_form,
    v_matrix,
    wald_power,
    zr_variance_printed_form,
)
from adaptrand.targets import (
    BinaryParams,
    GaussianParams,
    TargetAllocation,
    TargetDomainError,
    swap_arms,
)

URN = TargetAllocation("urn")
RSIHR = TargetAllocation("rsihr")
ALL_KINDS = ("urn", "rsihr", "neyman-binary", "zr-gaussian", "neyman-gaussian", "da-optimal")


def _random_params(kind: str, rng: np.random.Generator):
    if kind in ("urn", "rsihr", "neyman-binary"):
        return BinaryParams(*rng.uniform(0.05, 0.95, 2))
    return GaussianParams(
        mu1=rng.uniform(0.2, 3.0),
        mu2=rng.uniform(0.2, 3.0),
        tau1=rng.uniform(0.3, 3.0),
        tau2=rng.uniform(0.3, 3.0),
    )


# ---------------------------------------------------------------------------
# v matrix
# ---------------------------------------------------------------------------


def test_v_matrix_bernoulli_cells():
    m = v_matrix(BinaryParams(0.5, 0.5), 0.5)
    assert np.allclose(m, np.diag([0.5, 0.5]))
    m = v_matrix(BinaryParams(0.9, 0.7), 0.75)
    exact = [float(Fraction(9, 100) / Fraction(3, 4)), float(Fraction(21, 100) / Fraction(1, 4))]
    assert np.allclose(m, np.diag(exact), atol=1e-15)
    assert np.allclose(m, np.diag([0.12, 0.84]))


def test_v_matrix_gaussian_cells():
    m = v_matrix(GaussianParams(0, 0, 1.0, 2.0), 0.5)
    assert np.allclose(m[:2, :2], np.diag([2.0, 4.0]))
    assert np.allclose(m[2:, 2:], np.diag([8.0, 64.0]))


def test_v_matrix_domain():
    with pytest.raises(TargetDomainError):
        v_matrix(BinaryParams(0.5, 0.5), 0.0)


# ---------------------------------------------------------------------------
# Variance formulas against published cells
# ---------------------------------------------------------------------------


def test_urn_sigma_published_cells():
    assert sigma_general(URN, BinaryParams(0.9, 0.7)) == pytest.approx(0.75, abs=1e-10)
    assert sigma_closed(URN, BinaryParams(0.5, 0.5)) == pytest.approx(0.25, abs=1e-12)
    assert sigma_closed(URN, BinaryParams(0.2, 0.2)) == pytest.approx(0.0625, abs=1e-12)
    assert sigma_closed(URN, BinaryParams(0.8, 0.8)) == pytest.approx(1.0, abs=1e-12)
    assert sigma_closed(URN, BinaryParams(0.9, 0.3)) == pytest.approx(0.1640625, abs=1e-12)


def test_urn_sigma_ecmo_point():
    params = BinaryParams(65 / 93, 38 / 92)
    assert sigma_general(URN, params) == pytest.approx(0.2806, abs=5e-5)


def test_rsihr_sigma_published_cells():
    assert sigma_closed(RSIHR, BinaryParams(0.9, 0.7)) == pytest.approx(0.01742, abs=5e-6)
    assert sigma_closed(RSIHR, BinaryParams(0.2, 0.2)) == pytest.approx(0.25, abs=1e-12)
    assert sigma_closed(RSIHR, BinaryParams(0.7, 0.3)) == pytest.approx(0.0944, abs=5e-5)


def test_gaussian_sigma_symmetric_cells():
    assert sigma_closed(
        TargetAllocation("neyman-gaussian"), GaussianParams(0, 0, 1.7, 1.7)
    ) == pytest.approx(1 / 8, abs=1e-14)
    assert sigma_closed(
        TargetAllocation("da-optimal"), GaussianParams(0, 0, 0.4, 0.4)
    ) == pytest.approx(8 / 36, abs=1e-14)


def test_fixed_target_sigma_zero():
    t = TargetAllocation("fixed", rho0=0.5)
    assert sigma_general(t, BinaryParams(0.9, 0.7)) == 0.0
    assert crlb(t, BinaryParams(0.9, 0.7)) == 0.0


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_closed_equals_general_equals_crlb(kind):
    target = TargetAllocation(kind)
    rng = np.random.default_rng(11)
    for _ in range(200):
        params = _random_params(kind, rng)
        s_gen = sigma_general(target, params)
        s_closed = sigma_closed(target, params)
        bound = crlb(target, params)
        assert abs(s_closed - s_gen) <= 1e-8 * (1.0 + s_gen)
        assert abs(bound - s_gen) <= 1e-12


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_sigma_arm_swap_invariance(kind):
    target = TargetAllocation(kind)
    rng = np.random.default_rng(12)
    for _ in range(100):
        params = _random_params(kind, rng)
        assert sigma_general(target, swap_arms(params)) == pytest.approx(
            sigma_general(target, params), abs=1e-12, rel=1e-9
        )


def test_printed_urn_form_is_wrong_at_table_cells():
    # The squared mean-sum form contradicts the published variance table
    # at asymmetric cells; the unsquared form reproduces them.
    for p1, p2, printed in ((0.9, 0.7, 0.75), (0.9, 0.3, 0.16), (0.8, 0.7, 0.72)):
        correct = sigma_closed(URN, BinaryParams(p1, p2))
        wrong = urn_variance_squared_form(BinaryParams(p1, p2))
        assert correct == pytest.approx(printed, abs=0.0051)
        assert abs(wrong - printed) > 0.02


def test_printed_zr_form_misses_mean_terms():
    params = GaussianParams(1.0, 1.0, 1.0, 1.0)
    assert zr_variance_printed_form(params) == pytest.approx(0.125, abs=1e-15)
    assert sigma_closed(TargetAllocation("zr-gaussian"), params) == pytest.approx(0.1875, abs=1e-12)


# ---------------------------------------------------------------------------
# DBCD comparison variance
# ---------------------------------------------------------------------------


def test_dbcd_variance_published_cells():
    assert dbcd_variance(2.0, RSIHR, BinaryParams(0.9, 0.7)) == pytest.approx(0.0707, abs=5e-5)
    assert dbcd_variance(2.0, RSIHR, BinaryParams(0.2, 0.2)) == pytest.approx(0.35, abs=1e-12)


def test_dbcd_variance_large_gamma_limit():
    lb = sigma_general(RSIHR, BinaryParams(0.9, 0.7))
    assert dbcd_variance(1e6, RSIHR, BinaryParams(0.9, 0.7)) == pytest.approx(lb, abs=1e-5)


def test_dbcd_variance_dominates_bound():
    rng = np.random.default_rng(13)
    for kind in ALL_KINDS:
        target = TargetAllocation(kind)
        for _ in range(50):
            params = _random_params(kind, rng)
            assert dbcd_variance(2.0, target, params) > sigma_general(target, params)


def test_dbcd_table_asymptotic_column():
    rows = [
        (0.9, 0.7, 0.07), (0.9, 0.6, 0.08), (0.9, 0.5, 0.09), (0.9, 0.3, 0.15),
        (0.8, 0.8, 0.07), (0.8, 0.7, 0.08), (0.8, 0.6, 0.09), (0.7, 0.5, 0.10),
        (0.7, 0.3, 0.16), (0.6, 0.4, 0.13), (0.5, 0.5, 0.13), (0.5, 0.2, 0.25),
        (0.4, 0.3, 0.19), (0.2, 0.2, 0.35),
    ]
    for p1, p2, printed in rows:
        # half-ulp-of-print tolerance; the epsilon absorbs cells sitting
        # exactly on the rounding boundary (0.125 prints as 0.13).
        assert dbcd_variance(2.0, RSIHR, BinaryParams(p1, p2)) == pytest.approx(
            printed, abs=0.00501
        )


# ---------------------------------------------------------------------------
# Wald power
# ---------------------------------------------------------------------------


def test_wald_power_ecmo_point():
    assert wald_power(65 / 93, 38 / 92, 121, 64, 0.05) == pytest.approx(0.9703, abs=5e-5)


def test_wald_power_null_case():
    assert wald_power(0.4, 0.4, 200, 200, 0.05) == pytest.approx(0.025, abs=1e-4)


def test_wald_power_consistency():
    assert wald_power(0.55, 0.45, 1e8, 1e8, 0.05) > 1 - 1e-9


def test_wald_power_domain():
    with pytest.raises(TargetDomainError):
        wald_power(0.0, 0.5, 10, 10)
    with pytest.raises(TargetDomainError):
        wald_power(0.5, 0.5, 0, 10)


def test_normal_functions_accuracy():
    assert normal_cdf(0.0) == pytest.approx(0.5, abs=1e-15)
    assert normal_cdf(1.959963984540054) == pytest.approx(0.975, abs=1e-12)
    assert normal_quantile(0.975) == pytest.approx(1.959963984540054, abs=1e-10)
    assert normal_quantile(normal_cdf(1.2345)) == pytest.approx(1.2345, abs=1e-10)
