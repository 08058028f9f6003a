"""Randomization rules: biased coins and urn schemes.

Coin rules map the current trial state to the probability that the next
patient receives arm 1:

* ERADE: a three-branch discrete rule that nudges the running allocation
  toward the estimated target; the bias constant ``alpha`` in [0, 1)
  controls how hard an over- or under-represented arm is corrected.
* Efron's coin: ERADE with the constant target 1/2 (alpha = 2/3 is the
  classical choice).
* DBCD: a continuous allocation function of the current proportion and
  the estimated target with tuning exponent ``gamma``.
* Complete randomization: a fixed coin.

Urn rules (drop-the-loser, randomized play-the-winner) are sampled by
drawing balls; they expose draw/update operations instead of a
probability function.

ERADE and DBCD start with a burn-in: ``m0`` patients per arm assigned by
restricted randomization, realized as sequential sampling without
replacement from the multiset {m0 x arm1, m0 x arm2} (the law of a
uniformly permuted block of size 2 m0, one uniform per patient).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .estimators import BinaryEstimates, GaussianEstimates, binary_estimates, gaussian_estimates
from .rng import RandomStream
from .targets import TargetAllocation, evaluate, format_target, params_from_estimates, parse_target
from .trial import Bernoulli, Gaussian, ResponseModel, TrialState

# Ties in the comparison N1/m = rho are decided up to this relative
# slack to absorb floating-point representation error.  For a constant
# target of 1/2 the comparison |2*N1 - m| is integer-exact, so the tie
# branch fires exactly when 2*N1 = m for all m below 2^43.
TIE_EPS = 2.0**-44

__all__ = [
    "TIE_EPS",
    "DesignError",
    "erade_probability",
    "efron_probability",
    "dbcd_probability",
    "UrnState",
    "dl_draw",
    "dl_update",
    "rpw_draw",
    "rpw_update",
    "Erade",
    "EfronCoin",
    "Dbcd",
    "DropTheLoser",
    "PlayTheWinner",
    "ModifiedPlayTheWinner",
    "CompleteRandomization",
    "Rule",
    "DesignConfig",
    "burn_in_length",
    "burn_in_probability",
    "next_probability",
    "parse_design",
    "format_design",
    "validate_design_for_model",
]


class DesignError(ValueError):
    """Invalid design configuration or rule input."""


# ---------------------------------------------------------------------------
# Coin probability functions
# ---------------------------------------------------------------------------


def erade_probability(alpha: float, rho_hat: float, n1: int, m: int) -> float:
    """Arm-1 probability for the next patient under the discrete rule.

    Over-represented (N1/m above the estimated target): ``alpha * rho``.
    Balanced: ``rho``.  Under-represented: ``1 - alpha * (1 - rho)``.
    """
    if not 0.0 <= alpha < 1.0:
        raise DesignError(f"alpha must lie in [0, 1), got {alpha}")
    if not 0.0 < rho_hat < 1.0:
        raise DesignError(f"rho_hat must lie strictly in (0, 1), got {rho_hat}")
    if m < 0 or not 0 <= n1 <= m:
        raise DesignError(f"need 0 <= n1 <= m, got n1={n1}, m={m}")
    gap = n1 - m * rho_hat
    if abs(gap) <= TIE_EPS * m:
        return rho_hat
    if gap > 0.0:
        return alpha * rho_hat
    return 1.0 - alpha * (1.0 - rho_hat)


def efron_probability(alpha: float, n1: int, m: int) -> float:
    """The balanced special case: target fixed at 1/2."""
    return erade_probability(alpha, 0.5, n1, m)


def dbcd_probability(gamma: float, rho_hat: float, x: float) -> float:
    """Continuous allocation function g(x, rho) with tuning exponent gamma.

    ``x`` is the current arm-1 proportion.  g(rho, rho) = rho for any
    gamma; the boundaries are pinned at g(0, .) = 1 and g(1, .) = 0.
    """
    if gamma < 0.0:
        raise DesignError(f"gamma must be nonnegative, got {gamma}")
    if not 0.0 < rho_hat < 1.0:
        raise DesignError(f"rho_hat must lie strictly in (0, 1), got {rho_hat}")
    if not 0.0 <= x <= 1.0:
        raise DesignError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 1.0
    if x == 1.0:
        return 0.0
    # np.power keeps this bit-identical to the vectorized engine.
    num = rho_hat * np.power(rho_hat / x, gamma)
    den = num + (1.0 - rho_hat) * np.power((1.0 - rho_hat) / (1.0 - x), gamma)
    return float(num / den)


# ---------------------------------------------------------------------------
# Urn schemes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UrnState:
    """Ball counts; ``immigration`` is the replenishing type (drop-the-loser only)."""

    balls1: int
    balls2: int
    immigration: int = 0

    def __post_init__(self):
        if min(self.balls1, self.balls2, self.immigration) < 0:
            raise DesignError(f"ball counts must be nonnegative: {self}")

    @property
    def total(self) -> int:
        return self.balls1 + self.balls2 + self.immigration


def dl_draw(urn: UrnState, stream: RandomStream) -> tuple[int | None, UrnState]:
    """One drop-the-loser draw.

    Immigration ball: returned to the urn, one ball of each treatment
    type added, no patient assigned (arm is None).  Treatment ball:
    removed pending the response, patient assigned to that arm.
    """
    if urn.total == 0:
        raise DesignError("cannot draw from an empty urn")
    pick = stream.uniform() * urn.total
    if pick < urn.balls1:
        return 1, replace(urn, balls1=urn.balls1 - 1)
    if pick < urn.balls1 + urn.balls2:
        return 2, replace(urn, balls2=urn.balls2 - 1)
    return None, replace(urn, balls1=urn.balls1 + 1, balls2=urn.balls2 + 1)


def dl_update(urn_pending: UrnState, arm: int, success: bool) -> UrnState:
    """Resolve a pending drop-the-loser draw: success returns the ball."""
    if not success:
        return urn_pending
    if arm == 1:
        return replace(urn_pending, balls1=urn_pending.balls1 + 1)
    return replace(urn_pending, balls2=urn_pending.balls2 + 1)


def rpw_draw(urn: UrnState, stream: RandomStream) -> int:
    """Play-the-winner draw with replacement; the composition is unchanged."""
    total = urn.balls1 + urn.balls2
    if total == 0:
        raise DesignError("cannot draw from an empty urn")
    return 1 if stream.uniform() * total < urn.balls1 else 2

def rpw_update(urn: UrnState, arm: int, success: bool) -> UrnState:
    """Add one same-type ball on success, one opposite-type ball on failure."""
    add_to_1 = (arm == 1) == success
    if add_to_1:
        return replace(urn, balls1=urn.balls1 + 1)
    return replace(urn, balls2=urn.balls2 + 1)


# ---------------------------------------------------------------------------
# Design configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Erade:
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise DesignError(f"alpha must lie in [0, 1), got {self.alpha}")


@dataclass(frozen=True)
class EfronCoin:
    """Pure balancing coin (no burn-in, target 1/2)."""

    alpha: float = 2.0 / 3.0

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise DesignError(f"alpha must lie in [0, 1), got {self.alpha}")


@dataclass(frozen=True)
class Dbcd:
    gamma: float = 2.0

    def __post_init__(self):
        if self.gamma < 0.0:
            raise DesignError(f"gamma must be nonnegative, got {self.gamma}")


@dataclass(frozen=True)
class DropTheLoser:
    balls1: int = 5
    balls2: int = 5
    immigration: int = 1

    def initial_urn(self) -> UrnState:
        return UrnState(self.balls1, self.balls2, self.immigration)


@dataclass(frozen=True)
class PlayTheWinner:
    balls1: int = 1
    balls2: int = 1

    def initial_urn(self) -> UrnState:
        return UrnState(self.balls1, self.balls2)


@dataclass(frozen=True)
class ModifiedPlayTheWinner(PlayTheWinner):
    """Play-the-winner preceded by a restricted-randomization burn-in."""


@dataclass(frozen=True)
class CompleteRandomization:
    p: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DesignError(f"p must lie in [0, 1], got {self.p}")


Rule = (
    Erade
    | EfronCoin
    | Dbcd
    | DropTheLoser
    | PlayTheWinner
    | ModifiedPlayTheWinner
    | CompleteRandomization
)

_ADAPTIVE_COIN = (Erade, Dbcd)
_URN_RULES = (DropTheLoser, PlayTheWinner, ModifiedPlayTheWinner)


@dataclass(frozen=True)
class DesignConfig:
    """A randomization rule plus its target and burn-in settings.

    ``target`` is required for the adaptive coin rules (ERADE, DBCD) and
    meaningless for the others.  ``m0`` patients per arm are assigned by
    restricted randomization before an adaptive coin or the modified
    play-the-winner urn starts.  ``initial_gaussian`` is the pre-trial
    parameter guess used while a gaussian arm has no responses.
    """

    rule: Rule
    target: TargetAllocation | None = None
    m0: int = 2
    initial_gaussian: GaussianEstimates | None = None

    def __post_init__(self):
        if self.m0 < 1:
            raise DesignError(f"m0 must be at least 1, got {self.m0}")
        if isinstance(self.rule, _ADAPTIVE_COIN):
            if self.target is None:
                raise DesignError(f"{type(self.rule).__name__} requires a target allocation")
        elif self.target is not None:
            raise DesignError(f"{type(self.rule).__name__} does not take a target")

    @property
    def is_urn(self) -> bool:
        return isinstance(self.rule, _URN_RULES)

    @property
    def has_burn_in(self) -> bool:
        return isinstance(self.rule, _ADAPTIVE_COIN + (ModifiedPlayTheWinner,))


def burn_in_length(design: DesignConfig) -> int:
    return 2 * design.m0 if design.has_burn_in else 0


def burn_in_probability(design: DesignConfig, n: int, n1: int) -> float:
    """Arm-1 probability for patient n+1 of the permuted burn-in block.

    Equals the fraction of arm-1 slots remaining in the block, which is
    the conditional law of a uniformly random permutation.
    """
    remaining1 = design.m0 - n1
    remaining = 2 * design.m0 - n
    if remaining <= 0:
        raise DesignError("burn-in already complete")
    return remaining1 / remaining


def validate_design_for_model(design: DesignConfig, model: ResponseModel) -> None:
    """Reject configurations before the first patient is enrolled."""
    if isinstance(design.rule, _URN_RULES) and not isinstance(model, Bernoulli):
        raise DesignError("urn rules require binary responses")
    target = design.target
    if target is None:
        return
    if target.is_binary and not isinstance(model, Bernoulli):
        raise DesignError(f"target {target.kind!r} requires binary responses")
    if target.is_gaussian and not isinstance(model, Gaussian):
        raise DesignError(f"target {target.kind!r} requires gaussian responses")


def _rho_hat(
    design: DesignConfig, estimates: BinaryEstimates | GaussianEstimates
) -> float:
    params, _ = params_from_estimates(design.target, estimates)
    return evaluate(design.target, params)


def estimate_target_proportion(
    design: DesignConfig, estimates: BinaryEstimates | GaussianEstimates
) -> float:
    """The design's current target estimate (urn rules track the urn proportion)."""
    rule = design.rule
    if isinstance(rule, CompleteRandomization):
        return rule.p
    if isinstance(rule, EfronCoin):
        return 0.5
    target = design.target if design.target is not None else TargetAllocation("urn")
    params, _ = params_from_estimates(target, estimates)
    return evaluate(target, params)


def next_probability(
    design: DesignConfig,
    state: TrialState,
    estimates: BinaryEstimates | GaussianEstimates | None = None,
) -> float:
    """Arm-1 probability for the next patient of a coin-rule trial.

    Urn rules sample by draw/update instead and are rejected here.  When
    ``estimates`` is omitted they are computed from the state's
    responded patients.
    """
    rule = design.rule
    if isinstance(rule, CompleteRandomization):
        return rule.p
    if isinstance(rule, EfronCoin):
        return efron_probability(rule.alpha, state.n1, state.n)
    if isinstance(rule, _URN_RULES):
        raise DesignError(f"{type(rule).__name__} assigns by urn draws, not a coin probability")
    if state.n < burn_in_length(design):
        return burn_in_probability(design, state.n, state.n1)
    if estimates is None:
        if isinstance(state.model, Bernoulli):
            estimates = binary_estimates(state)
        else:
            estimates = gaussian_estimates(state, design.initial_gaussian)
    rho = _rho_hat(design, estimates)
    if isinstance(rule, Erade):
        return erade_probability(rule.alpha, rho, state.n1, state.n)
    return dbcd_probability(rule.gamma, rho, state.n1 / state.n)


# ---------------------------------------------------------------------------
# Selection strings
# ---------------------------------------------------------------------------


def parse_design(
    text: str,
    target: str | TargetAllocation | None = None,
    m0: int = 2,
    initial_gaussian: GaussianEstimates | None = None,
) -> DesignConfig:
    """Build a DesignConfig from a rule string.

    Rule strings: ``erade:<alpha>``, ``efron:<alpha>``, ``dbcd:<gamma>``,
    ``dl:<b1,b2,b0>``, ``rpw:<b1,b2>``, ``mrpw:<m0,b1,b2>``, ``cr:<p>``.
    Parameters may be omitted (``erade`` alone) to take defaults.
    """
    if isinstance(target, str):
        target = parse_target(target)
    name, _, argtext = text.partition(":")
    args = [a for a in argtext.split(",") if a] if argtext else []
    try:
        if name == "erade":
            rule: Rule = Erade(*(float(a) for a in args[:1]))
        elif name == "efron":
            rule = EfronCoin(*(float(a) for a in args[:1]))
        elif name == "dbcd":
            rule = Dbcd(*(float(a) for a in args[:1]))
        elif name == "dl":
            rule = DropTheLoser(*(int(a) for a in args[:3]))
        elif name == "rpw":
            rule = PlayTheWinner(*(int(a) for a in args[:2]))
        elif name == "mrpw":
            if args:
                m0 = int(args[0])
            rule = ModifiedPlayTheWinner(*(int(a) for a in args[1:3]))
        elif name == "cr":
            rule = CompleteRandomization(*(float(a) for a in args[:1]))
        else:
            raise DesignError(f"unknown design {name!r}")
    except ValueError as exc:
        raise DesignError(f"bad design string {text!r}: {exc}") from exc
    if not isinstance(rule, _ADAPTIVE_COIN):
        target = None
    return DesignConfig(rule=rule, target=target, m0=m0, initial_gaussian=initial_gaussian)


def format_design(design: DesignConfig) -> str:
    """Inverse of parse_design for the rule part (target formatted separately)."""
    r = design.rule
    if isinstance(r, Erade):
        return f"erade:{r.alpha!r}"
    if isinstance(r, EfronCoin):
        return f"efron:{r.alpha!r}"
    if isinstance(r, Dbcd):
        return f"dbcd:{r.gamma!r}"
    if isinstance(r, ModifiedPlayTheWinner):
        return f"mrpw:{design.m0},{r.balls1},{r.balls2}"
    if isinstance(r, DropTheLoser):
        return f"dl:{r.balls1},{r.balls2},{r.immigration}"
    if isinstance(r, PlayTheWinner):
        return f"rpw:{r.balls1},{r.balls2}"
    return f"cr:{r.p!r}"
