"""Shared diagnostics sink for non-fatal pipeline findings.

Every stage of the pipeline can record things it noticed but did not treat
as errors (unmapped carrier phrases, unbindable transshipment events,
overlapping vessel calls, ...). Callers that do not care pass None and the
records are dropped.
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import List, Optional, Tuple


@dataclass
class Diagnostics:
    """Accumulates (kind, message) records plus per-kind counters."""

    records: List[Tuple[str, str]] = field(default_factory=list)
    counts: Counter = field(default_factory=Counter)

    def add(self, kind: str, message: str) -> None:
        self.records.append((kind, message))
        self.counts[kind] += 1

    def count(self, kind: str) -> int:
        return self.counts.get(kind, 0)

    def merge(self, other: "Diagnostics") -> None:
        self.records.extend(other.records)
        self.counts.update(other.counts)

    def __len__(self) -> int:
        return len(self.records)


def record(diag: Optional[Diagnostics], kind: str, message: str) -> None:
    """Record into ``diag`` if a sink was provided, else drop silently."""
    if diag is not None:
        diag.add(kind, message)
