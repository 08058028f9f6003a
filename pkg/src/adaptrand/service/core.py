"""Framework-free service logic: live trials backed by replayable journals.

A live trial holds the current :class:`TrialState`, the trial's own
random stream, and (for urn rules) the urn composition.  Every mutation
is journaled before the response is returned; restarting the service
replays every journal and verifies, event by event, that the recorded
assignment probabilities and stream positions match a recomputation
from the prefix state.  A mismatch means the journal was corrupted or
tampered with.

The service never learns true response probabilities; trials declare
only the response variant (binary or gaussian).  Estimates come from
recorded outcomes alone, and pending patients count toward allocation
totals but not toward estimates.
"""

from __future__ import annotations

import threading
import uuid
from pathlib import Path
from typing import Any

from ..designs import (
    TIE_EPS,
    CompleteRandomization,
    DesignConfig,
    DesignError,
    Dbcd,
    DropTheLoser,
    EfronCoin,
    Erade,
    ModifiedPlayTheWinner,
    PlayTheWinner,
    UrnState,
    burn_in_length,
    burn_in_probability,
    estimate_target_proportion,
    format_design,
    next_probability,
    parse_design,
)
from ..estimators import (
    BinaryEstimates,
    GaussianEstimates,
    binary_estimates,
    gaussian_estimates,
)
from ..rng import RandomStream
from ..targets import TargetDomainError, format_target, params_from_estimates
from ..trial import (
    Bernoulli,
    BinaryOutcome,
    ContinuousOutcome,
    Gaussian,
    TrialError,
    TrialState,
    apply_assignment,
    apply_outcome,
    new_trial,
)
from .journal import Journal, TrialEvent, read_events, rfc3339_now

SNAPSHOT_SCHEMA = "trial-snapshot-v1"
EVENT_SCHEMA = "trial-event-v1"


class ServiceValidationError(ValueError):
    """Invalid request payload or trial configuration."""


class UnknownTrialError(KeyError):
    pass


class UnknownPatientError(KeyError):
    pass


class DuplicateOutcomeError(ValueError):
    pass


class TrialCompletedError(ValueError):
    pass


class JournalCorruptError(ValueError):
    pass


# Placeholder response models carrying only the variant; their parameter
# values are never read by state transitions or estimators.
_VARIANT_MODELS = {
    "binary": Bernoulli(0.5, 0.5),
    "gaussian": Gaussian(0.0, 0.0, 1.0, 1.0),
}


class _LiveTrial:
    """In-memory state of one trial; all mutations go through TrialService."""

    def __init__(
        self,
        trial_id: str,
        design: DesignConfig,
        variant: str,
        max_n: int,
        master_seed: int,
        created_ts: str,
    ):
        self.trial_id = trial_id
        self.design = design
        self.variant = variant
        self.max_n = max_n
        self.master_seed = master_seed
        self.created_ts = created_ts
        self.state: TrialState = new_trial(_VARIANT_MODELS[variant])
        self.stream = RandomStream(master_seed, 0)
        rule = design.rule
        self.urn: UrnState | None = (
            rule.initial_urn() if isinstance(rule, (DropTheLoser, PlayTheWinner)) else None
        )
        self.history: list[dict[str, Any]] = []
        self.events: list[TrialEvent] = []
        self.lock = threading.Lock()
        self.enroll_keys: dict[str, dict[str, Any]] = {}
        self.outcome_keys: set[str] = set()

    # -- design queries ---------------------------------------------------

    @property
    def status(self) -> str:
        return "completed" if self.state.n >= self.max_n else "enrolling"

    def estimates(self) -> BinaryEstimates | GaussianEstimates:
        if self.variant == "binary":
            return binary_estimates(self.state)
        return gaussian_estimates(self.state, self.design.initial_gaussian)

    def rho_hat(self) -> float:
        return estimate_target_proportion(self.design, self.estimates())

    def _coin_probability(self) -> float:
        return next_probability(self.design, self.state, self.estimates())

    def next_probability(self) -> float | None:
        """Arm-1 probability the next enrollment would use (None if completed)."""
        if self.status == "completed":
            return None
        rule = self.design.rule
        if isinstance(rule, (ModifiedPlayTheWinner, PlayTheWinner)):
            if self.state.n < burn_in_length(self.design):
                return burn_in_probability(self.design, self.state.n, self.state.n1)
            urn = self.urn
            return urn.balls1 / (urn.balls1 + urn.balls2)
        if isinstance(rule, DropTheLoser):
            urn = self.urn
            total = urn.balls1 + urn.balls2
            # Conditional on the draw assigning a patient.
            return urn.balls1 / total if total else 0.5
        return self._coin_probability()

    def next_branch(self) -> str | None:
        """Label of the rule branch the next enrollment would take."""
        if self.status == "completed":
            return None
        rule = self.design.rule
        n, n1 = self.state.n, self.state.n1
        if self.design.has_burn_in and n < burn_in_length(self.design):
            return "burn-in"
        if isinstance(rule, (Erade, EfronCoin)):
            rho = 0.5 if isinstance(rule, EfronCoin) else self.rho_hat()
            gap = n1 - n * rho
            if abs(gap) <= TIE_EPS * n:
                return "tie"
            return "over-represented" if gap > 0 else "under-represented"
        if isinstance(rule, Dbcd):
            return "continuous"
        if isinstance(rule, CompleteRandomization):
            return "fixed-coin"
        return "urn-draw"

    # -- assignment computation (shared by live path and replay) -----------

    def compute_assignment(self) -> dict[str, Any]:
        """Draw the next assignment, mutating stream/urn/state/history.

        Returns the payload fields of the assigned event.
        """
        if self.status == "completed":
            raise TrialCompletedError(f"trial {self.trial_id} already has {self.max_n} patients")
        rule = self.design.rule
        position = self.stream.position
        draws = 0
        if isinstance(rule, DropTheLoser):
            urn = self.urn
            while True:
                u = self.stream.uniform()
                draws += 1
                pick = u * urn.total
                if pick < urn.balls1:
                    probability = urn.balls1 / (urn.balls1 + urn.balls2)
                    arm = 1
                    urn = UrnState(urn.balls1 - 1, urn.balls2, urn.immigration)
                    break
                if pick < urn.balls1 + urn.balls2:
                    probability = urn.balls1 / (urn.balls1 + urn.balls2)
                    arm = 2
                    urn = UrnState(urn.balls1, urn.balls2 - 1, urn.immigration)
                    break
                urn = UrnState(urn.balls1 + 1, urn.balls2 + 1, urn.immigration)
            self.urn = urn
        elif isinstance(rule, (ModifiedPlayTheWinner, PlayTheWinner)) and self.state.n >= burn_in_length(self.design):
            urn = self.urn
            probability = urn.balls1 / (urn.balls1 + urn.balls2)
            u = self.stream.uniform()
            draws = 1
            arm = 1 if u * (urn.balls1 + urn.balls2) < urn.balls1 else 2
        else:
            if isinstance(rule, (ModifiedPlayTheWinner, PlayTheWinner)):
                probability = burn_in_probability(self.design, self.state.n, self.state.n1)
            else:
                probability = self._coin_probability()
            u = self.stream.uniform()
            draws = 1
            arm = 1 if u < probability else 2
        self.state = apply_assignment(self.state, arm)
        payload: dict[str, Any] = {
            "patient": self.state.n,
            "arm": arm,
            "probability_used": probability,
            "stream_position": position,
            "draws": draws,
        }
        if self.urn is not None:
            payload["urn"] = _urn_dict(self.urn)
        self.history.append(
            {"m": self.state.n, "prop1": self.state.n1 / self.state.n, "rho": self.rho_hat()}
        )
        return payload

    def apply_outcome_value(self, patient: int, value: bool | float) -> dict[str, Any]:
        """Record an outcome, mutating state/urn; returns the event payload."""
        try:
            arm = self.state.arm_of(patient)
        except TrialError as exc:
            raise UnknownPatientError(str(exc)) from exc
        if self.state.outcomes[patient - 1] is not None:
            raise DuplicateOutcomeError(f"patient {patient} already has an outcome")
        if self.variant == "binary":
            if not isinstance(value, bool):
                raise ServiceValidationError("binary trials record {'success': true|false}")
            outcome: BinaryOutcome | ContinuousOutcome = BinaryOutcome(success=value)
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ServiceValidationError("gaussian trials record {'value': <number>}")
            outcome = ContinuousOutcome(value=float(value))
        self.state = apply_outcome(self.state, patient, outcome)
        rule = self.design.rule
        if isinstance(rule, DropTheLoser):
            success = bool(outcome.success)
            if success:
                self.urn = UrnState(
                    self.urn.balls1 + (arm == 1),
                    self.urn.balls2 + (arm == 2),
                    self.urn.immigration,
                )
        elif isinstance(rule, (ModifiedPlayTheWinner, PlayTheWinner)):
            success = bool(outcome.success)
            add1 = (arm == 1) == success
            self.urn = UrnState(
                self.urn.balls1 + add1, self.urn.balls2 + (not add1), self.urn.immigration
            )
        payload: dict[str, Any] = {
            "patient": patient,
            "value": value,
        }
        if self.urn is not None:
            payload["urn"] = _urn_dict(self.urn)
        return payload

    # -- snapshots ---------------------------------------------------------

    def snapshot(self) -> dict[str, Any]:
        est = self.estimates()
        if isinstance(est, BinaryEstimates):
            est_dict: dict[str, Any] = {"p1": est.p1, "p2": est.p2}
        else:
            est_dict = {"mu1": est.mu1, "mu2": est.mu2, "tau1": est.tau1, "tau2": est.tau2}
        clamped = False
        if self.design.target is not None:
            _, clamped = params_from_estimates(self.design.target, est)
        return {
            "schema": SNAPSHOT_SCHEMA,
            "trial_id": self.trial_id,
            "status": self.status,
            "variant": self.variant,
            "design": format_design(self.design),
            "target": format_target(self.design.target) if self.design.target else None,
            "m0": self.design.m0,
            "max_n": self.max_n,
            "n": self.state.n,
            "n1": self.state.n1,
            "n2": self.state.n2,
            "pending": list(self.state.pending()),
            "estimates": est_dict,
            "estimate_clamped": clamped,
            "rho_hat": self.rho_hat(),
            "next_probability": self.next_probability(),
            "next_branch": self.next_branch(),
            "urn": _urn_dict(self.urn) if self.urn is not None else None,
            "history": list(self.history),
        }


def _urn_dict(urn: UrnState) -> dict[str, int]:
    return {"balls1": urn.balls1, "balls2": urn.balls2, "immigration": urn.immigration}


def _design_from_payload(payload: dict[str, Any]) -> DesignConfig:
    theta0 = payload.get("theta0")
    initial = None
    if theta0 is not None:
        initial = GaussianEstimates(
            mu1=theta0["mu1"],
            mu2=theta0["mu2"],
            var1=theta0["tau1"] ** 2,
            var2=theta0["tau2"] ** 2,
        )
    return parse_design(
        payload["design"],
        target=payload.get("target"),
        m0=payload.get("m0", 2),
        initial_gaussian=initial,
    )


class TrialService:
    """All live trials under one journal directory."""

    def __init__(self, journal_dir: str | Path):
        self.journal_dir = Path(journal_dir)
        self.journal_dir.mkdir(parents=True, exist_ok=True)
        self._registry_lock = threading.Lock()
        self._trials: dict[str, _LiveTrial] = {}
        self._journals: dict[str, Journal] = {}
        self._create_keys: dict[str, str] = {}
        for path in sorted(self.journal_dir.glob("*.ndjson")):
            trial = self.replay_file(path)
            self._trials[trial.trial_id] = trial
            self._journals[trial.trial_id] = Journal(path)
            key = trial.events[0].payload.get("idempotency_key")
            if key:
                self._create_keys[key] = trial.trial_id

    # -- replay ------------------------------------------------------------

    @staticmethod
    def replay_file(path: str | Path) -> _LiveTrial:
        """Rebuild a trial from its journal, verifying every assignment.

        Raises JournalCorruptError on sequence gaps, malformed events,
        or any divergence between recorded and recomputed assignment
        probabilities, arms, or stream positions.
        """
        try:
            events = read_events(path)
        except ValueError as exc:
            raise JournalCorruptError(str(exc)) from exc
        if not events:
            raise JournalCorruptError(f"{path}: empty journal")
        for i, ev in enumerate(events):
            if ev.seq != i + 1:
                raise JournalCorruptError(
                    f"{path}: sequence gap: expected seq {i + 1}, found {ev.seq}"
                )
        created = events[0]
        if created.kind != "created":
            raise JournalCorruptError(f"{path}: first event must be 'created'")
        p = created.payload
        try:
            design = _design_from_payload(p)
            trial = _LiveTrial(
                trial_id=created.trial_id,
                design=design,
                variant=p["variant"],
                max_n=p["max_n"],
                master_seed=p["master_seed"],
                created_ts=created.ts,
            )
        except (KeyError, DesignError, TargetDomainError, TrialError) as exc:
            raise JournalCorruptError(f"{path}: bad created event: {exc}") from exc
        trial.events.append(created)
        for ev in events[1:]:
            if ev.trial_id != created.trial_id:
                raise JournalCorruptError(f"{path}: mixed trial ids in one journal")
            if ev.kind == "assigned":
                recomputed = trial.compute_assignment()
                for field in ("patient", "arm", "probability_used", "stream_position", "draws"):
                    if recomputed[field] != ev.payload.get(field):
                        raise JournalCorruptError(
                            f"{path}: seq {ev.seq}: recorded {field}="
                            f"{ev.payload.get(field)!r} but replay computed "
                            f"{recomputed[field]!r}"
                        )
            elif ev.kind == "outcome":
                try:
                    value = ev.payload["value"]
                    trial.apply_outcome_value(ev.payload["patient"], value)
                except (UnknownPatientError, DuplicateOutcomeError, ServiceValidationError) as exc:
                    raise JournalCorruptError(f"{path}: seq {ev.seq}: {exc}") from exc
            else:
                raise JournalCorruptError(f"{path}: seq {ev.seq}: unknown kind {ev.kind!r}")
            trial.events.append(ev)
            key = ev.payload.get("idempotency_key")
            if key:
                if ev.kind == "assigned":
                    trial.enroll_keys[key] = {
                        k: ev.payload[k]
                        for k in ("patient", "arm", "probability_used", "stream_position")
                    }
                else:
                    trial.outcome_keys.add(key)
        return trial

    # -- operations ---------------------------------------------------------

    def _get(self, trial_id: str) -> _LiveTrial:
        trial = self._trials.get(trial_id)
        if trial is None:
            raise UnknownTrialError(f"unknown trial {trial_id!r}")
        return trial

    def _append(self, trial: _LiveTrial, kind: str, payload: dict[str, Any]) -> TrialEvent:
        event = TrialEvent(
            seq=len(trial.events) + 1,
            trial_id=trial.trial_id,
            kind=kind,
            payload=payload,
            ts=rfc3339_now(),
        )
        self._journals[trial.trial_id].append(event)
        trial.events.append(event)
        return event

    def create_trial(
        self,
        design: str,
        variant: str,
        max_n: int,
        master_seed: int,
        target: str | None = None,
        m0: int = 2,
        theta0: dict[str, float] | None = None,
        idempotency_key: str | None = None,
    ) -> dict[str, Any]:
        payload = {
            "schema": EVENT_SCHEMA,
            "design": design,
            "target": target,
            "m0": m0,
            "theta0": theta0,
            "variant": variant,
            "max_n": max_n,
            "master_seed": master_seed,
        }
        if idempotency_key:
            payload["idempotency_key"] = idempotency_key
        if variant not in _VARIANT_MODELS:
            raise ServiceValidationError(f"variant must be 'binary' or 'gaussian', got {variant!r}")
        try:
            config = _design_from_payload(payload)
        except (DesignError, TargetDomainError, TrialError, KeyError) as exc:
            raise ServiceValidationError(str(exc)) from exc
        if config.target is not None:
            want = "binary" if config.target.is_binary else (
                "gaussian" if config.target.is_gaussian else variant
            )
            if want != variant:
                raise ServiceValidationError(
                    f"target {config.target.kind!r} requires variant {want!r}"
                )
        elif config.is_urn and variant != "binary":
            raise ServiceValidationError("urn rules require binary responses")
        if max_n < max(1, burn_in_length(config)):
            raise ServiceValidationError(
                f"max_n={max_n} is below the burn-in of {burn_in_length(config)} patients"
            )
        if not 0 <= master_seed < 2**64:
            raise ServiceValidationError("master_seed must be a 64-bit nonnegative integer")

        with self._registry_lock:
            if idempotency_key and idempotency_key in self._create_keys:
                return self.get_status(self._create_keys[idempotency_key])
            trial_id = uuid.uuid4().hex
            trial = _LiveTrial(
                trial_id=trial_id,
                design=config,
                variant=variant,
                max_n=max_n,
                master_seed=master_seed,
                created_ts=rfc3339_now(),
            )
            self._trials[trial_id] = trial
            self._journals[trial_id] = Journal(self.journal_dir / f"{trial_id}.ndjson")
            self._append(trial, "created", payload)
            if idempotency_key:
                self._create_keys[idempotency_key] = trial_id
        return trial.snapshot()

    def enroll_next(self, trial_id: str, idempotency_key: str | None = None) -> dict[str, Any]:
        trial = self._get(trial_id)
        with trial.lock:
            if idempotency_key and idempotency_key in trial.enroll_keys:
                return {**trial.enroll_keys[idempotency_key], "schema": SNAPSHOT_SCHEMA,
                        "trial_id": trial_id, "replayed": True}
            payload = trial.compute_assignment()
            if idempotency_key:
                payload["idempotency_key"] = idempotency_key
            self._append(trial, "assigned", payload)
            result = {
                "schema": SNAPSHOT_SCHEMA,
                "trial_id": trial_id,
                "patient": payload["patient"],
                "arm": payload["arm"],
                "probability_used": payload["probability_used"],
                "stream_position": payload["stream_position"],
                "status": trial.status,
                "n": trial.state.n,
            }
            if idempotency_key:
                trial.enroll_keys[idempotency_key] = {
                    k: payload[k]
                    for k in ("patient", "arm", "probability_used", "stream_position")
                }
            return result

    def record_outcome(
        self,
        trial_id: str,
        patient: int,
        value: bool | float,
        idempotency_key: str | None = None,
    ) -> dict[str, Any]:
        trial = self._get(trial_id)
        with trial.lock:
            if idempotency_key and idempotency_key in trial.outcome_keys:
                return trial.snapshot()
            payload = trial.apply_outcome_value(patient, value)
            if idempotency_key:
                payload["idempotency_key"] = idempotency_key
                trial.outcome_keys.add(idempotency_key)
            self._append(trial, "outcome", payload)
            return trial.snapshot()

    def get_status(self, trial_id: str) -> dict[str, Any]:
        return self._get(trial_id).snapshot()

    def get_events(self, trial_id: str, since: int = 0) -> list[dict[str, Any]]:
        trial = self._get(trial_id)
        return [
            {"seq": e.seq, "trial_id": e.trial_id, "kind": e.kind, "payload": e.payload,
             "ts": e.ts}
            for e in trial.events
            if e.seq > since
        ]

    def journal_path(self, trial_id: str) -> Path:
        self._get(trial_id)
        return self.journal_dir / f"{trial_id}.ndjson"

    def close(self) -> None:
        for journal in self._journals.values():
            journal.close()
