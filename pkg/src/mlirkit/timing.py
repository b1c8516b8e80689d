"""Indexing-time ledger and the efficiency/effectiveness trade-off report.

Indexing cost is tracked in three local stages (text processing,
representation, index build) plus a translation stage that is always
externally supplied metadata: no machine translation runs here.
"""

from __future__ import annotations

import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field

STAGES = ("translation", "text_processing", "representation", "index_build")


@dataclass
class TimingLedger:
    doc_count: int
    stages: dict[str, float] = field(default_factory=lambda: {s: 0.0 for s in STAGES})

    def __post_init__(self):
        for name, seconds in self.stages.items():
            if name not in STAGES:
                raise ValueError(f"unknown stage {name!r}; expected one of {STAGES}")
            if seconds < 0:
                raise ValueError(f"stage {name!r} has negative time {seconds}")
        for name in STAGES:
            self.stages.setdefault(name, 0.0)
        if self.doc_count < 0:
            raise ValueError(f"doc_count must be >= 0, got {self.doc_count}")

    @property
    def total(self) -> float:
        return sum(self.stages.values())

    @property
    def per_doc(self) -> float | None:
        """Seconds per document; None (flagged) when doc_count is 0."""
        if self.doc_count == 0:
            if self.total > 0:
                warnings.warn("nonzero time with doc_count 0: per-document time undefined",
                              RuntimeWarning, stacklevel=2)
            return None
        return self.total / self.doc_count

    @contextmanager
    def time_stage(self, name: str):
        if name not in STAGES:
            raise ValueError(f"unknown stage {name!r}")
        start = time.perf_counter()
        try:
            yield
        finally:
            self.stages[name] += time.perf_counter() - start

    def to_dict(self) -> dict:
        return {
            "doc_count": self.doc_count,
            "stages": dict(self.stages),
            "total": self.total,
            "per_doc": self.per_doc,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TimingLedger":
        ledger = cls(doc_count=int(d["doc_count"]), stages={k: float(v) for k, v in d["stages"].items()})
        declared = d.get("total")
        if declared is not None and ledger.total > 0:
            if abs(declared - ledger.total) > 0.01 * ledger.total:
                raise ValueError(
                    f"declared total {declared} differs from stage sum {ledger.total} by more than 1%"
                )
        return ledger


def relative_reduction(t_new: float, t_base: float) -> float:
    """1 - t_new/t_base: the fraction of t_base saved by moving to t_new."""
    if t_base == 0:
        raise ValueError("baseline time must be nonzero")
    return 1.0 - t_new / t_base


def timing_report(
    ledgers: dict[str, TimingLedger],
    map_scores: dict[str, float] | None = None,
) -> dict:
    """Per-configuration costs, pairwise reductions, and scatter points.

    Pairwise rows cover every ordered pair of configurations with a
    defined per-document time; MAP values, when supplied, feed the
    (per-doc seconds, MAP) scatter for external plotting.
    """
    if not ledgers:
        raise ValueError("need at least one ledger")
    map_scores = map_scores or {}
    configs = {}
    for name, ledger in ledgers.items():
        configs[name] = {
            "doc_count": ledger.doc_count,
            "stages": dict(ledger.stages),
            "total_seconds": ledger.total,
            "per_doc_seconds": ledger.per_doc,
            "map": map_scores.get(name),
        }
    pairwise = []
    names = sorted(ledgers)
    for a in names:
        for b in names:
            if a == b:
                continue
            t_a, t_b = ledgers[a].per_doc, ledgers[b].per_doc
            if t_a is None or t_b is None or t_b == 0:
                continue
            pairwise.append({
                "config": a,
                "baseline": b,
                "reduction": relative_reduction(t_a, t_b),
            })
    scatter = [
        {"config": name, "per_doc_seconds": cfg["per_doc_seconds"], "map": cfg["map"]}
        for name, cfg in sorted(configs.items())
    ]
    return {"configs": configs, "pairwise": pairwise, "scatter": scatter}
