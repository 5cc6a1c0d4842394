"""Evaluation instrumentation: stratified response sampling for expert review
and metric aggregation from interaction logs, decisions, ratings, and surveys.

The report pairs each metric with its target threshold and a met/unmet flag.
Two organizational-impact rows need HR and time-tracking inputs this system
cannot observe; they render as "external input required".
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from datetime import datetime, timezone

from .errors import EmptyWindow, SampleTooLarge
from .extraction import ValidationDecision
from .runtime import parse_timestamp

UNDEFINED = "undefined"

# Target thresholds the report compares against, one per report row.
TARGETS = {
    "accuracy": {"dimension": "Knowledge Fidelity", "metric": "Response accuracy", "target": "> 0.85"},
    "correction_rate": {"dimension": "Knowledge Fidelity", "metric": "Correction rate", "target": "< 0.10"},
    "weekly_query_volume": {"dimension": "Adoption", "metric": "Weekly query volume", "target": "> 50/wk"},
    "nps": {"dimension": "Adoption", "metric": "Net Promoter Score", "target": "> 40"},
    "onboarding_reduction": {"dimension": "Org. Impact", "metric": "Onboarding reduction", "target": "> 20%"},
    "consultation_time_saved": {"dimension": "Org. Impact", "metric": "Consultation time saved", "target": "> 15%"},
}

ACCURACY_RATING_THRESHOLD = 4  # ratings at or above count as accurate
ACCURACY_TARGET = 0.85
CORRECTION_TARGET = 0.10
VOLUME_TARGET = 50.0
NPS_TARGET = 40


@dataclass(frozen=True)
class ReviewSample:
    sample_id: str
    query_ids: tuple[str, ...]
    strata: dict  # stratum label -> allocated count
    seed: int

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "query_ids": list(self.query_ids),
            "strata": {"|".join(k): v for k, v in self.strata.items()},
            "seed": self.seed,
        }


def largest_remainder_allocation(sizes: dict, n: int) -> dict:
    """Proportional allocation rounded by largest remainder.

    Ties on remainder break toward the larger stratum, then by label, so the
    result is deterministic.
    """
    total = sum(sizes.values())
    if n > total:
        raise SampleTooLarge(f"requested {n} from population of {total}")
    if total == 0:
        return {}
    quotas = {label: n * size / total for label, size in sizes.items()}
    allocation = {label: int(quotas[label]) for label in sizes}
    leftover = n - sum(allocation.values())
    by_remainder = sorted(
        sizes,
        key=lambda label: (-(quotas[label] - allocation[label]), -sizes[label], label),
    )
    for label in by_remainder[:leftover]:
        allocation[label] += 1
    return allocation


def _stratum_rng(seed: int, label: tuple) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{'|'.join(label)}".encode("utf-8")).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def stratified_sample(
    population: list[dict], n: int, seed: int, sample_id: str
) -> ReviewSample:
    """Sample responses proportionally across (artifact type of first
    citation, domain tag) strata; deterministic per seed.

    Population entries are interaction log entries joined with the first
    citation's type and tag; entries without citations carry no stratum and
    are excluded before calling this.
    """
    strata: dict[tuple, list[str]] = {}
    for entry in population:
        label = (entry["artifact_type"], entry["domain_tag"])
        strata.setdefault(label, []).append(entry["query_id"])
    allocation = largest_remainder_allocation(
        {label: len(members) for label, members in strata.items()}, n
    )
    chosen: list[str] = []
    for label in sorted(strata):
        members = sorted(strata[label])
        take = allocation.get(label, 0)
        if take:
            rng = _stratum_rng(seed, label)
            chosen.extend(rng.sample(members, take))
    return ReviewSample(
        sample_id=sample_id, query_ids=tuple(chosen), strata=allocation, seed=seed
    )


def _iso_week(ts: datetime) -> str:
    year, week, _ = ts.isocalendar()
    return f"{year}-W{week:02d}"


def _ratio(numerator: int, denominator: int):
    return numerator / denominator if denominator else UNDEFINED


@dataclass(frozen=True)
class MetricsReport:
    window: tuple[str, str]
    accuracy: object
    correction_rate: object
    weekly_query_volume: dict  # ISO week -> count
    mean_weekly_volume: object
    resolution_rate: object
    mean_time_to_answer_ms: object
    nps: object
    flags: dict  # metric key -> "met" | "unmet" | "not-evaluated" | "external input required"

    def to_dict(self) -> dict:
        return {
            "window": list(self.window),
            "accuracy": self.accuracy,
            "correction_rate": self.correction_rate,
            "weekly_query_volume": dict(self.weekly_query_volume),
            "mean_weekly_volume": self.mean_weekly_volume,
            "resolution_rate": self.resolution_rate,
            "mean_time_to_answer_ms": self.mean_time_to_answer_ms,
            "nps": self.nps,
            "flags": dict(self.flags),
        }


def compute_metrics(
    interactions: list[dict],
    decisions: list[ValidationDecision],
    ratings: list[dict],
    surveys: list[dict],
    window: tuple[datetime, datetime],
) -> MetricsReport:
    """Aggregate every metric over the window; division guards yield the
    "undefined" marker, never NaN."""
    lo, hi = window
    if lo.tzinfo is None:
        lo = lo.replace(tzinfo=timezone.utc)
    if hi.tzinfo is None:
        hi = hi.replace(tzinfo=timezone.utc)
    if hi <= lo:
        raise EmptyWindow(f"window [{lo}, {hi}) is empty")

    def in_window(ts_text: str) -> bool:
        return lo <= parse_timestamp(ts_text) < hi

    logs = [e for e in interactions if in_window(e["asked_at"])]
    window_decisions = [
        d for d in decisions if lo <= d.decided_at < hi
    ]
    window_ratings = [r for r in ratings if in_window(r["rated_at"])]
    window_surveys = [s for s in surveys if in_window(s["submitted_at"])]

    accurate = sum(1 for r in window_ratings if r["rating"] >= ACCURACY_RATING_THRESHOLD)
    accuracy = _ratio(accurate, len(window_ratings))

    corrections = sum(1 for d in window_decisions if d.verdict in ("Reject", "Edit"))
    correction_rate = _ratio(corrections, len(window_decisions))

    flagged = [e for e in logs if e.get("resolved_flag") is not None]
    resolution_rate = _ratio(
        sum(1 for e in flagged if e["resolved_flag"]), len(flagged)
    )

    volume: dict[str, int] = {}
    for e in logs:
        week = _iso_week(parse_timestamp(e["asked_at"]))
        volume[week] = volume.get(week, 0) + 1
    mean_weekly = (sum(volume.values()) / len(volume)) if volume else UNDEFINED

    latencies = [e["latency_ms"] for e in logs]
    mean_latency = (sum(latencies) / len(latencies)) if latencies else UNDEFINED

    if window_surveys:
        promoters = sum(1 for s in window_surveys if s["score"] >= 9)
        detractors = sum(1 for s in window_surveys if s["score"] <= 6)
        nps = round(100.0 * (promoters - detractors) / len(window_surveys))
    else:
        nps = UNDEFINED

    def flag(value, met) -> str:
        if value == UNDEFINED:
            return "not-evaluated"
        return "met" if met(value) else "unmet"

    flags = {
        "accuracy": flag(accuracy, lambda v: v > ACCURACY_TARGET),
        "correction_rate": flag(correction_rate, lambda v: v < CORRECTION_TARGET),
        "weekly_query_volume": flag(mean_weekly, lambda v: v > VOLUME_TARGET),
        "nps": flag(nps, lambda v: v > NPS_TARGET),
        "onboarding_reduction": "external input required",
        "consultation_time_saved": "external input required",
    }

    return MetricsReport(
        window=(lo.isoformat(), hi.isoformat()),
        accuracy=accuracy,
        correction_rate=correction_rate,
        weekly_query_volume=volume,
        mean_weekly_volume=mean_weekly,
        resolution_rate=resolution_rate,
        mean_time_to_answer_ms=mean_latency,
        nps=nps,
        flags=flags,
    )


def report_rows(report: MetricsReport) -> list[dict]:
    """Six rows mirroring the target table: Dimension, Metric, Target,
    Computed, Met."""
    computed = {
        "accuracy": report.accuracy,
        "correction_rate": report.correction_rate,
        "weekly_query_volume": report.mean_weekly_volume,
        "nps": report.nps,
        "onboarding_reduction": "n/a",
        "consultation_time_saved": "n/a",
    }
    rows = []
    for key, meta in TARGETS.items():
        value = computed[key]
        if isinstance(value, float):
            value = f"{value:.4g}"
        rows.append(
            {
                "dimension": meta["dimension"],
                "metric": meta["metric"],
                "target": meta["target"],
                "computed": str(value),
                "met": report.flags[key],
            }
        )
    return rows
