"""Two-arm trial state: response models, outcomes, and pure state transitions.

A trial assigns each arriving patient to arm 1 or arm 2 and later records
that patient's response.  :class:`TrialState` is an immutable value; the
operations here return new states, so states can be shared freely across
threads or processes and journaled histories replay bit-identically.

Assigned-but-unresponded patients count toward the per-arm totals but not
toward the response sums: randomization rules compare assignment
proportions against targets estimated from responded patients only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .rng import RandomStream

ARMS = (1, 2)

__all__ = [
    "ARMS",
    "Bernoulli",
    "Gaussian",
    "ResponseModel",
    "BinaryOutcome",
    "ContinuousOutcome",
    "Outcome",
    "TrialState",
    "TrialError",
    "new_trial",
    "apply_assignment",
    "apply_outcome",
    "sample_response",
]


class TrialError(ValueError):
    """Invalid trial configuration or state transition."""


@dataclass(frozen=True)
class Bernoulli:
    """Binary responses: success probabilities strictly inside (0, 1)."""

    p1: float
    p2: float

    def __post_init__(self):
        for name, p in (("p1", self.p1), ("p2", self.p2)):
            if not 0.0 < p < 1.0:
                raise TrialError(f"{name} must lie strictly in (0, 1), got {p}")

    def success_probability(self, arm: int) -> float:
        return self.p1 if arm == 1 else self.p2


@dataclass(frozen=True)
class Gaussian:
    """Continuous responses: N(mu_k, tau_k^2) with tau_k > 0."""

    mu1: float
    mu2: float
    tau1: float
    tau2: float

    def __post_init__(self):
        for name, tau in (("tau1", self.tau1), ("tau2", self.tau2)):
            if not tau > 0.0:
                raise TrialError(f"{name} must be positive, got {tau}")

    def arm_params(self, arm: int) -> tuple[float, float]:
        return (self.mu1, self.tau1) if arm == 1 else (self.mu2, self.tau2)


ResponseModel = Bernoulli | Gaussian


@dataclass(frozen=True)
class BinaryOutcome:
    success: bool

    @property
    def value(self) -> float:
        return 1.0 if self.success else 0.0


@dataclass(frozen=True)
class ContinuousOutcome:
    value: float


Outcome = BinaryOutcome | ContinuousOutcome


@dataclass(frozen=True)
class TrialState:
    """Full sequential record plus per-arm sufficient statistics.

    ``assignments[i]`` is the arm of patient ``i+1``; ``outcomes[i]`` is
    that patient's response or None while pending.  Aggregates are kept
    in 2-tuples indexed by ``arm - 1``.
    """

    model: ResponseModel
    assignments: tuple[int, ...] = ()
    outcomes: tuple[Outcome | None, ...] = ()
    n_by_arm: tuple[int, int] = (0, 0)
    responded: tuple[int, int] = (0, 0)
    sums: tuple[float, float] = (0.0, 0.0)
    sumsq: tuple[float, float] = (0.0, 0.0)

    @property
    def n(self) -> int:
        return len(self.assignments)

    @property
    def n1(self) -> int:
        return self.n_by_arm[0]

    @property
    def n2(self) -> int:
        return self.n_by_arm[1]

    def arm_of(self, patient: int) -> int:
        if not 1 <= patient <= self.n:
            raise TrialError(f"unknown patient {patient} (n={self.n})")
        return self.assignments[patient - 1]

    def pending(self) -> tuple[int, ...]:
        """Patient indices assigned but without a recorded outcome."""
        return tuple(i + 1 for i, o in enumerate(self.outcomes) if o is None)


def new_trial(model: ResponseModel) -> TrialState:
    """Empty state for a trial under the given response model."""
    if not isinstance(model, (Bernoulli, Gaussian)):
        raise TrialError(f"unsupported response model: {model!r}")
    return TrialState(model=model)


def _bump(t: tuple, index: int, delta) -> tuple:
    lst = list(t)
    lst[index] += delta
    return tuple(lst)


def apply_assignment(state: TrialState, arm: int) -> TrialState:
    """Assign the next patient to ``arm``; the outcome starts pending."""
    if arm not in ARMS:
        raise TrialError(f"arm must be 1 or 2, got {arm}")
    return replace(
        state,
        assignments=state.assignments + (arm,),
        outcomes=state.outcomes + (None,),
        n_by_arm=_bump(state.n_by_arm, arm - 1, 1),
    )


def apply_outcome(state: TrialState, patient: int, outcome: Outcome) -> TrialState:
    """Record ``patient``'s response, updating that arm's sufficient statistics."""
    arm = state.arm_of(patient)
    if state.outcomes[patient - 1] is not None:
        raise TrialError(f"patient {patient} already has an outcome")
    if isinstance(state.model, Bernoulli) and not isinstance(outcome, BinaryOutcome):
        raise TrialError("binary trial requires BinaryOutcome")
    if isinstance(state.model, Gaussian) and not isinstance(outcome, ContinuousOutcome):
        raise TrialError("gaussian trial requires ContinuousOutcome")
    k = arm - 1
    x = outcome.value
    outcomes = list(state.outcomes)
    outcomes[patient - 1] = outcome
    return replace(
        state,
        outcomes=tuple(outcomes),
        responded=_bump(state.responded, k, 1),
        sums=_bump(state.sums, k, x),
        sumsq=_bump(state.sumsq, k, x * x),
    )


def sample_response(model: ResponseModel, arm: int, stream: RandomStream) -> Outcome:
    """Draw one response for a patient on ``arm``.

    Consumes one uniform for a Bernoulli model and exactly two for a
    Gaussian model, so stream positions advance identically across arms.
    """
    if arm not in ARMS:
        raise TrialError(f"arm must be 1 or 2, got {arm}")
    if isinstance(model, Bernoulli):
        return BinaryOutcome(success=stream.bernoulli(model.success_probability(arm)))
    mu, tau = model.arm_params(arm)
    return ContinuousOutcome(value=stream.normal(mu, tau))
