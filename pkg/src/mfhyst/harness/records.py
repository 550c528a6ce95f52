"""Per-replica records and their order-independent aggregation."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional

from ..outcome import Outcome, Tag


@dataclass(frozen=True)
class RunRecord:
    config_hash: str
    replica: int
    seed: int
    level: str
    outcome: Optional[Outcome] = None
    h_plus: Optional[bool] = None
    h_minus: Optional[bool] = None
    wall: float = 0.0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.level not in ("chain", "sde"):
            raise ValueError(f"unknown level {self.level!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["outcome"] = self.outcome.to_dict() if self.outcome else None
        return d


@dataclass
class Summary:
    """Counts by (level, outcome tag) plus event counts; merging is addition."""

    counts: Counter = field(default_factory=Counter)
    h_counts: Counter = field(default_factory=Counter)
    keys: frozenset = frozenset()

    @classmethod
    def of(cls, records: Iterable[RunRecord]) -> "Summary":
        s = cls()
        keys = set()
        for r in records:
            key = (r.config_hash, r.level, r.replica)
            if key in keys:
                raise ValueError(f"duplicate record {key}")
            keys.add(key)
            if r.outcome is not None:
                s.counts[(r.level, r.outcome.tag.value)] += 1
            s.counts[(r.level, "total")] += 1
            if r.h_plus:
                s.h_counts[(r.level, "h_plus")] += 1
            if r.h_minus:
                s.h_counts[(r.level, "h_minus")] += 1
        s.keys = frozenset(keys)
        return s

    def merge(self, other: "Summary") -> "Summary":
        if self.keys & other.keys:
            raise ValueError("shards overlap")
        return Summary(self.counts + other.counts, self.h_counts + other.h_counts,
                       self.keys | other.keys)

    def frequency(self, level: str, tag: Tag | str) -> tuple[float, float]:
        name = tag.value if isinstance(tag, Tag) else tag
        n = self.counts[(level, "total")]
        if n == 0:
            return math.nan, math.nan
        p = self.counts[(level, name)] / n
        return p, math.sqrt(p * (1 - p) / n)

    def to_dict(self) -> dict:
        return {"counts": {f"{a}:{b}": v for (a, b), v in sorted(self.counts.items())},
                "h_counts": {f"{a}:{b}": v for (a, b), v in sorted(self.h_counts.items())}}

    def __eq__(self, other) -> bool:
        return (isinstance(other, Summary) and self.counts == other.counts
                and self.h_counts == other.h_counts)
