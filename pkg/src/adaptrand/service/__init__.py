"""Live allocation service: journaled trial conduct over HTTP."""

from .core import (
    DuplicateOutcomeError,
    JournalCorruptError,
    ServiceValidationError,
    TrialCompletedError,
    TrialService,
    UnknownPatientError,
    UnknownTrialError,
)
from .journal import Journal, TrialEvent, read_events

__all__ = [
    "TrialService",
    "Journal",
    "TrialEvent",
    "read_events",
    "ServiceValidationError",
    "UnknownTrialError",
    "UnknownPatientError",
    "DuplicateOutcomeError",
    "TrialCompletedError",
    "JournalCorruptError",
]
