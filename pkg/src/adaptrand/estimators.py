"""Parameter estimates feeding the target allocation.

Binary trials use shrunk proportions ``(successes + 0.5) / (responded + 1)``
which stay strictly inside (0, 1) even with zero observations.  Gaussian
trials use maximum-likelihood mean/variance (divisor N), with a relative
floor on the variance so that downstream targets never see tau = 0.

Only responded patients enter the estimates; pending assignments count
toward allocation totals but not here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .trial import Bernoulli, Gaussian, TrialError, TrialState

# Relative variance floor: a single (or constant) observation must not
# collapse tau-hat to zero, which would push ratio targets onto the
# boundary of their domain.
VAR_FLOOR_SCALE = 1e-8
# Lower clamp on mean estimates used inside the mean-dependent gaussian
# target, which requires positive means under its square roots.
MEAN_CLAMP = 1e-6

__all__ = [
    "VAR_FLOOR_SCALE",
    "MEAN_CLAMP",
    "BinaryEstimates",
    "GaussianEstimates",
    "shrunk_mean",
    "binary_estimates",
    "gaussian_estimates",
]


@dataclass(frozen=True)
class BinaryEstimates:
    p1: float
    p2: float


@dataclass(frozen=True)
class GaussianEstimates:
    mu1: float
    mu2: float
    var1: float
    var2: float

    @property
    def tau1(self) -> float:
        return math.sqrt(self.var1)

    @property
    def tau2(self) -> float:
        return math.sqrt(self.var2)


def shrunk_mean(total: float, count: int, prior: float) -> float:
    """Mean estimate ``(total + prior) / (count + 1)``, defined at count = 0."""
    if count < 0:
        raise TrialError(f"count must be nonnegative, got {count}")
    return (total + prior) / (count + 1)


def binary_estimates(state: TrialState) -> BinaryEstimates:
    """Shrunk per-arm success probabilities from responded patients."""
    if not isinstance(state.model, Bernoulli):
        raise TrialError("binary_estimates requires a Bernoulli trial")
    return BinaryEstimates(
        p1=shrunk_mean(state.sums[0], state.responded[0], 0.5),
        p2=shrunk_mean(state.sums[1], state.responded[1], 0.5),
    )


def _mle(total: float, total_sq: float, count: int) -> tuple[float, float]:
    mu = total / count
    raw_var = total_sq / count - mu * mu
    floor = VAR_FLOOR_SCALE * max(1.0, mu * mu)
    return mu, max(raw_var, floor)


def gaussian_estimates(
    state: TrialState,
    initial: GaussianEstimates | None = None,
) -> GaussianEstimates:
    """Per-arm MLE mean/variance; arms without responses fall back to ``initial``.

    ``initial`` is the pre-trial guess used while an arm has no responded
    patients (only relevant before burn-in completes or while outcomes
    are pending in a live trial).  Defaults to mean 0, variance 1.
    """
    if not isinstance(state.model, Gaussian):
        raise TrialError("gaussian_estimates requires a Gaussian trial")
    if initial is None:
        initial = GaussianEstimates(0.0, 0.0, 1.0, 1.0)
    mu1, var1 = initial.mu1, initial.var1
    mu2, var2 = initial.mu2, initial.var2
    if state.responded[0] >= 1:
        mu1, var1 = _mle(state.sums[0], state.sumsq[0], state.responded[0])
    if state.responded[1] >= 1:
        mu2, var2 = _mle(state.sums[1], state.sumsq[1], state.responded[1])
    return GaussianEstimates(mu1=mu1, mu2=mu2, var1=var1, var2=var2)
