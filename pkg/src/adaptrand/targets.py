"""Target allocation proportions and their analytic gradients.

A target maps the (unknown) response parameters to the desired long-run
fraction of patients on arm 1, strictly inside (0, 1).  The catalog:

================  ========================================================
name              proportion of patients on arm 1
================  ========================================================
urn               Q2 / (Q1 + Q2)            (limit of play-the-winner urns)
rsihr             sqrt(P1) / (sqrt(P1) + sqrt(P2))   (minimizes failures)
neyman-binary     sqrt(P1 Q1) / (sqrt(P1 Q1) + sqrt(P2 Q2))
zr-gaussian       tau1 sqrt(mu2) / (tau1 sqrt(mu2) + tau2 sqrt(mu1))
neyman-gaussian   tau1 / (tau1 + tau2)
da-optimal        tau1^(4/3) / (tau1^(4/3) + tau2^(4/3))
fixed:<r>         the constant r
================  ========================================================

where ``Qk = 1 - Pk``.  Some sources print the urn proportion with Q1 in
the numerator; that form is inconsistent with the known urn limits (it
would allocate more patients to the *worse* arm) and with every
published allocation table for this family, so the Q2 form is used here.

Gradients for gaussian targets are taken with respect to the coordinates
``(mu1, tau1^2, mu2, tau2^2)``: the second sufficient statistic of a
normal response is the squared deviation, whose expectation is the
variance, and variance-based covariance blocks pair with these
coordinates in the allocation-variance quadratic form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimators import MEAN_CLAMP, BinaryEstimates, GaussianEstimates

# Evaluation requires parameters strictly inside the open domain by at
# least this margin; boundary values are errors, not clamps.
DOMAIN_MARGIN = 1e-12

BINARY_TARGETS = ("urn", "rsihr", "neyman-binary")
GAUSSIAN_TARGETS = ("zr-gaussian", "neyman-gaussian", "da-optimal")

__all__ = [
    "BINARY_TARGETS",
    "GAUSSIAN_TARGETS",
    "DOMAIN_MARGIN",
    "TargetDomainError",
    "BinaryParams",
    "GaussianParams",
    "TargetParams",
    "TargetAllocation",
    "evaluate",
    "gradient",
    "parse_target",
    "format_target",
    "params_from_estimates",
    "swap_arms",
]


class TargetDomainError(ValueError):
    """Parameters outside the target's open domain."""


@dataclass(frozen=True)
class BinaryParams:
    p1: float
    p2: float


@dataclass(frozen=True)
class GaussianParams:
    mu1: float
    mu2: float
    tau1: float
    tau2: float


TargetParams = BinaryParams | GaussianParams


@dataclass(frozen=True)
class TargetAllocation:
    """A named allocation proportion; ``rho0`` only for kind='fixed'."""

    kind: str
    rho0: float | None = None

    def __post_init__(self):
        if self.kind == "fixed":
            if self.rho0 is None or not 0.0 < self.rho0 < 1.0:
                raise TargetDomainError(f"fixed target needs rho0 in (0,1), got {self.rho0}")
        elif self.kind not in BINARY_TARGETS + GAUSSIAN_TARGETS:
            raise TargetDomainError(f"unknown target kind {self.kind!r}")
        elif self.rho0 is not None:
            raise TargetDomainError(f"rho0 only applies to fixed targets, not {self.kind!r}")

    @property
    def is_binary(self) -> bool:
        return self.kind in BINARY_TARGETS

    @property
    def is_gaussian(self) -> bool:
        return self.kind in GAUSSIAN_TARGETS


def parse_target(text: str) -> TargetAllocation:
    """Parse a selection string: a catalog name or ``fixed:<rho0>``."""
    if text.startswith("fixed:"):
        return TargetAllocation("fixed", rho0=float(text.split(":", 1)[1]))
    return TargetAllocation(text)


def format_target(target: TargetAllocation) -> str:
    if target.kind == "fixed":
        return f"fixed:{target.rho0!r}"
    return target.kind


def _check_binary(params: TargetParams) -> BinaryParams:
    if not isinstance(params, BinaryParams):
        raise TargetDomainError(f"binary target requires BinaryParams, got {type(params).__name__}")
    for name, p in (("p1", params.p1), ("p2", params.p2)):
        if not DOMAIN_MARGIN < p < 1.0 - DOMAIN_MARGIN:
            raise TargetDomainError(f"{name} must lie strictly in (0,1), got {p}")
    return params


def _check_gaussian(params: TargetParams, need_positive_means: bool) -> GaussianParams:
    if not isinstance(params, GaussianParams):
        raise TargetDomainError(
            f"gaussian target requires GaussianParams, got {type(params).__name__}"
        )
    for name, tau in (("tau1", params.tau1), ("tau2", params.tau2)):
        if not tau > DOMAIN_MARGIN:
            raise TargetDomainError(f"{name} must be positive, got {tau}")
    if need_positive_means:
        for name, mu in (("mu1", params.mu1), ("mu2", params.mu2)):
            if not mu > DOMAIN_MARGIN:
                raise TargetDomainError(f"{name} must be positive for this target, got {mu}")
    return params


def evaluate(target: TargetAllocation, params: TargetParams | None = None) -> float:
    """The target proportion at ``params``; always strictly inside (0, 1)."""
    kind = target.kind
    if kind == "fixed":
        return float(target.rho0)  # type: ignore[arg-type]
    if kind in BINARY_TARGETS:
        b = _check_binary(params)
        p1, p2 = b.p1, b.p2
        if kind == "urn":
            return (1.0 - p2) / (2.0 - p1 - p2)
        if kind == "rsihr":
            a, c = np.sqrt(p1), np.sqrt(p2)
            return float(a / (a + c))
        a = np.sqrt(p1 * (1.0 - p1))
        c = np.sqrt(p2 * (1.0 - p2))
        return float(a / (a + c))
    g = _check_gaussian(params, need_positive_means=kind == "zr-gaussian")
    if kind == "zr-gaussian":
        a = g.tau1 * np.sqrt(g.mu2)
        c = g.tau2 * np.sqrt(g.mu1)
        return float(a / (a + c))
    if kind == "neyman-gaussian":
        return g.tau1 / (g.tau1 + g.tau2)
    # np.power keeps this bit-identical to the vectorized simulation engine.
    a = np.power(g.tau1, 4.0 / 3.0)
    c = np.power(g.tau2, 4.0 / 3.0)
    return float(a / (a + c))


def gradient(target: TargetAllocation, params: TargetParams | None = None) -> np.ndarray:
    """Partial derivatives of the proportion over the parameter coordinates.

    Binary targets return ``[d/dP1, d/dP2]``.  Gaussian targets return
    ``[d/dmu1, d/ds1, d/dmu2, d/ds2]`` with ``sk = tauk^2``.  Fixed
    targets return the zero vector matching the parameter family (binary
    when given BinaryParams, gaussian otherwise).
    """
    kind = target.kind
    if kind == "fixed":
        return np.zeros(2 if isinstance(params, BinaryParams) else 4)
    if kind in BINARY_TARGETS:
        b = _check_binary(params)
        p1, p2 = b.p1, b.p2
        if kind == "urn":
            d = 2.0 - p1 - p2
            return np.array([(1.0 - p2) / d**2, -(1.0 - p1) / d**2])
        if kind == "rsihr":
            a, c = np.sqrt(p1), np.sqrt(p2)
            s2 = (a + c) ** 2
            return np.array([c / (2.0 * a * s2), -a / (2.0 * c * s2)])
        a = np.sqrt(p1 * (1.0 - p1))
        c = np.sqrt(p2 * (1.0 - p2))
        s2 = (a + c) ** 2
        return np.array(
            [c * (1.0 - 2.0 * p1) / (2.0 * a * s2), -a * (1.0 - 2.0 * p2) / (2.0 * c * s2)]
        )
    g = _check_gaussian(params, need_positive_means=kind == "zr-gaussian")
    s1, s2 = g.tau1**2, g.tau2**2
    if kind == "zr-gaussian":
        a = g.tau1 * np.sqrt(g.mu2)
        c = g.tau2 * np.sqrt(g.mu1)
        ss = (a + c) ** 2
        ac = a * c
        return np.array(
            [
                -ac / (2.0 * g.mu1 * ss),
                ac / (2.0 * s1 * ss),
                ac / (2.0 * g.mu2 * ss),
                -ac / (2.0 * s2 * ss),
            ]
        )
    if kind == "neyman-gaussian":
        ss = (g.tau1 + g.tau2) ** 2
        return np.array(
            [0.0, g.tau2 / (2.0 * g.tau1 * ss), 0.0, -g.tau1 / (2.0 * g.tau2 * ss)]
        )
    # da-optimal, written directly in the variance coordinates:
    # a/(a+c) with a = s1^(2/3), c = s2^(2/3).
    a = s1 ** (2.0 / 3.0)
    c = s2 ** (2.0 / 3.0)
    ss = (a + c) ** 2
    return np.array(
        [
            0.0,
            (2.0 / 3.0) * s1 ** (-1.0 / 3.0) * c / ss,
            0.0,
            -(2.0 / 3.0) * s2 ** (-1.0 / 3.0) * a / ss,
        ]
    )


def swap_arms(params: TargetParams) -> TargetParams:
    """Relabel the arms (used by symmetry checks)."""
    if isinstance(params, BinaryParams):
        return BinaryParams(p1=params.p2, p2=params.p1)
    return GaussianParams(mu1=params.mu2, mu2=params.mu1, tau1=params.tau2, tau2=params.tau1)


def params_from_estimates(
    target: TargetAllocation,
    estimates: BinaryEstimates | GaussianEstimates,
) -> tuple[TargetParams, bool]:
    """Adapt current estimates to the target's parameter domain.

    Returns the params plus a flag that is True when a mean estimate had
    to be clamped up to ``MEAN_CLAMP`` to keep the mean-dependent
    gaussian target's square roots real.  Shrunk binary estimates and
    floored variances already lie inside their domains.
    """
    if isinstance(estimates, BinaryEstimates):
        return BinaryParams(p1=estimates.p1, p2=estimates.p2), False
    clamped = False
    mu1, mu2 = estimates.mu1, estimates.mu2
    if target.kind == "zr-gaussian":
        if mu1 < MEAN_CLAMP:
            mu1, clamped = MEAN_CLAMP, True
        if mu2 < MEAN_CLAMP:
            mu2, clamped = MEAN_CLAMP, True
    return GaussianParams(mu1=mu1, mu2=mu2, tau1=estimates.tau1, tau2=estimates.tau2), clamped
