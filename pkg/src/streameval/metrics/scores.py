"""Per-task scores: judged accuracy, LCS-based consistency, latency."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import fmean
from typing import Iterable, Mapping

from ..core import AnnotationTrack, ResponseLog, TaskType
from ..errors import DegenerateTrack, JudgeUnavailable, MalformedVerdict
from .judge import Judge, JudgeVerdict
from .timeline import Timeline

logger = logging.getLogger(__name__)

AS_PAPER = "as_paper"
N_MINUS_1 = "n_minus_1"


def longest_common_substring(a: str, b: str) -> int:
    """Length of the longest contiguous run shared by ``a`` and ``b`` (O(|a|·|b|) time, O(|b|) space)."""
    if not a or not b:
        return 0
    best = 0
    prev = [0] * (len(b) + 1)
    for ca in a:
        cur = [0] * (len(b) + 1)
        for j, cb in enumerate(b, 1):
            if ca == cb:
                v = prev[j - 1] + 1
                cur[j] = v
                if v > best:
                    best = v
        prev = cur
    return best


def lcs_distance(a: str, b: str) -> float:
    """``1 - LCSubstr(a, b) / max(|a|, |b|)``; two empty strings are at distance 0."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return 1.0 - longest_common_substring(a, b) / longest


@dataclass
class AccuracyResult:
    accuracy: float | None
    verdicts: list[JudgeVerdict | None]
    failures: int = 0

    @property
    def rubric_mean(self) -> float | None:
        scored = [v.rubric for v in self.verdicts if v is not None]
        return fmean(scored) if scored else None


def accuracy(timeline: Timeline, track: AnnotationTrack, judge: Judge, parallelism: int = 1) -> AccuracyResult:
    """Mean binary verdict over the scored seconds of one task.

    A second whose verdict stays malformed after the judge's retry is left
    out of the mean and counted in ``failures``.
    """
    if len(timeline) != track.n_steps:
        raise ValueError(f"timeline has {len(timeline)} steps, track {track.task_id} has {track.n_steps}")

    def one(i: int) -> JudgeVerdict | None:
        try:
            return judge.judge(track.entries[i].caption, timeline.texts[i], track.prompt)
        except MalformedVerdict as exc:
            logger.warning("%s t=%d: scoring failure: %s", track.task_id, i, exc)
            return None

    steps = range(track.n_steps)
    if parallelism > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            verdicts = list(pool.map(one, steps))
    else:
        verdicts = [one(i) for i in steps]
    scored = [v.score for v in verdicts if v is not None]
    failures = sum(v is None for v in verdicts)
    return AccuracyResult(fmean(scored) if scored else None, verdicts, failures)


def consistency(timeline: Timeline, track: AnnotationTrack, denominator: str = AS_PAPER) -> tuple[float, float]:
    """Return ``(raw, clipped)`` consistency of one task.

    Each consecutive pair contributes ``1 - D(R_i, R_i+1) + D(G_i, G_i+1)``.
    The default divides the N-1 terms by N (``as_paper``); ``n_minus_1``
    divides by N-1 instead.
    """
    n = track.n_steps
    if n < 2:
        raise DegenerateTrack(f"consistency needs at least 2 steps, track {track.task_id} has {n}")
    if len(timeline) != n:
        raise ValueError(f"timeline has {len(timeline)} steps, track {track.task_id} has {n}")
    r, g = timeline.texts, track.captions
    total = sum(1.0 - lcs_distance(r[i], r[i + 1]) + lcs_distance(g[i], g[i + 1]) for i in range(n - 1))
    if denominator == AS_PAPER:
        raw = total / n
    elif denominator == N_MINUS_1:
        raw = total / (n - 1)
    else:
        raise ValueError(f"unknown consistency denominator {denominator!r}")
    return raw, min(max(raw, 0.0), 1.0)


@dataclass
class LatencyStats:
    per_task: dict[str, float | None] = field(default_factory=dict)
    per_type: dict[str, float | None] = field(default_factory=dict)


def latency_stats(logs: Iterable[ResponseLog], task_types: Mapping[str, TaskType] | None = None) -> LatencyStats:
    """Mean end-to-end latency per task and per task type (pauses included).

    Type means pool all responses of that type's tasks.
    """
    logs = list(logs)
    if not logs:
        raise ValueError("latency_stats needs at least one log")
    stats = LatencyStats()
    pooled: dict[str, list[float]] = {}
    for log in logs:
        lats = [r.latency for r in log.responses]
        stats.per_task[log.task_id] = fmean(lats) if lats else None
        if task_types and log.task_id in task_types:
            pooled.setdefault(task_types[log.task_id].value, []).extend(lats)
    for tt in TaskType:
        if tt.value in pooled:
            stats.per_type[tt.value] = fmean(pooled[tt.value]) if pooled[tt.value] else None
    return stats
