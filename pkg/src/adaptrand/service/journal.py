"""Append-only trial journals: one JSON object per line, fsynced on append.

Each trial owns one UTF-8 journal file.  Events carry a gapless
per-trial sequence number; replaying a journal reconstructs the live
state exactly, so a crash between any two appends loses nothing.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path


def rfc3339_now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class TrialEvent:
    seq: int
    trial_id: str
    kind: str  # created | assigned | outcome
    payload: dict
    ts: str

    def to_line(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


class Journal:
    """Appender for one trial's journal file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh = open(self.path, "a", encoding="utf-8")

    def append(self, event: TrialEvent) -> None:
        self._fh.write(event.to_line() + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def close(self) -> None:
        self._fh.close()


def read_events(path: str | Path) -> list[TrialEvent]:
    """Parse a journal file; raises ValueError on malformed lines."""
    events: list[TrialEvent] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                events.append(
                    TrialEvent(
                        seq=obj["seq"],
                        trial_id=obj["trial_id"],
                        kind=obj["kind"],
                        payload=obj["payload"],
                        ts=obj["ts"],
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed journal line: {exc}") from exc
    return events
