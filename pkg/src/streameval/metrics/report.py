"""Suite-level aggregation and report rendering (JSON + markdown table)."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from statistics import fmean
from typing import Any, Iterable, Mapping, Sequence

from ..core import AnnotationTrack, ResponseLog, TaskType
from ..errors import DegenerateTrack, MissingLog, MissingMetadata
from .judge import Judge
from .scores import AS_PAPER, accuracy, consistency, latency_stats
from .timeline import extrapolate

logger = logging.getLogger(__name__)

WEIGHTINGS = ("uniform", "inverse_category", "inverse_task", "inverse_both")
WEIGHTING_LABELS = {
    "uniform": "Uniform",
    "inverse_category": "Inverse Category",
    "inverse_task": "Inverse Task",
    "inverse_both": "Inverse Category and Task",
}


@dataclass
class TaskScore:
    task_id: str
    task_type: str
    category: str
    n_steps: int
    accuracy: float | None
    consistency_raw: float | None
    consistency: float | None
    mean_latency: float | None
    rubric_mean: float | None = None
    judge_failures: int = 0
    responses: int = 0
    incomplete: bool = False


@dataclass
class MetricsReport:
    per_task: dict[str, TaskScore]
    overall_accuracy: float | None
    overall_consistency: float | None
    per_type_accuracy: dict[str, float | None]
    weighted_accuracy: dict[str, float | None]
    per_type_latency: dict[str, float | None]
    weighting: str = "uniform"
    judge: str = "oracle"
    consistency_denominator: str = AS_PAPER
    warnings: list[str] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.per_task)

    def to_dict(self) -> dict[str, Any]:
        return {
            "K": self.k,
            "consistency_denominator": self.consistency_denominator,
            "judge": self.judge,
            "overall": {
                "accuracy": self.overall_accuracy,
                "consistency": self.overall_consistency,
                "accuracy_percent": _pct(self.overall_accuracy),
                "consistency_percent": _pct(self.overall_consistency),
            },
            "per_task": {tid: asdict(ts) for tid, ts in sorted(self.per_task.items())},
            "per_type_accuracy": self.per_type_accuracy,
            "per_type_latency": self.per_type_latency,
            "warnings": self.warnings,
            "weighted_accuracy": self.weighted_accuracy,
            "weighting": self.weighting,
        }


def _pct(x: float | None) -> float | None:
    return None if x is None else round(100.0 * x, 1)


def task_weights(meta: Mapping[str, tuple[str, str]], weighting: str) -> dict[str, float]:
    """Normalised per-task weights; ``meta`` maps task_id to (task_type, category)."""
    if weighting not in WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}; expected one of {WEIGHTINGS}")
    by_type: dict[str, int] = {}
    by_cat: dict[str, int] = {}
    for tt, cat in meta.values():
        by_type[tt] = by_type.get(tt, 0) + 1
        by_cat[cat] = by_cat.get(cat, 0) + 1
    raw = {}
    for tid, (tt, cat) in meta.items():
        w = 1.0
        if weighting in ("inverse_category", "inverse_both"):
            w /= by_cat[cat]
        if weighting in ("inverse_task", "inverse_both"):
            w /= by_type[tt]
        raw[tid] = w
    total = sum(raw[t] for t in sorted(raw))
    return {tid: w / total for tid, w in raw.items()}


def weighted_mean(values: Mapping[str, float], meta: Mapping[str, tuple[str, str]], weighting: str) -> float | None:
    ids = sorted(values)
    if not ids:
        return None
    missing = [t for t in ids if t not in meta]
    if missing:
        raise MissingMetadata(f"no task_type/category for task(s): {', '.join(missing)}")
    if weighting == "uniform":
        return fmean(values[t] for t in ids)
    w = task_weights({t: meta[t] for t in ids}, weighting)
    return sum(w[t] * values[t] for t in ids)


def aggregate(
    per_task: Mapping[str, TaskScore],
    tracks_meta: Mapping[str, tuple[str, str]] | None = None,
    weighting: str = "uniform",
) -> MetricsReport:
    """Combine per-task scores into suite aggregates.

    ``tracks_meta`` maps task_id to (task_type, category) and defaults to the
    metadata already on each TaskScore.
    """
    if weighting not in WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}; expected one of {WEIGHTINGS}")
    if tracks_meta is None:
        tracks_meta = {tid: (ts.task_type, ts.category) for tid, ts in per_task.items()}
    missing = sorted(set(per_task) - set(tracks_meta))
    if missing:
        raise MissingMetadata(f"no task_type/category for task(s): {', '.join(missing)}")
    acc = {t: s.accuracy for t, s in per_task.items() if s.accuracy is not None}
    cons = {t: s.consistency for t, s in per_task.items() if s.consistency is not None}
    per_type = {}
    for tt in TaskType:
        vals = [acc[t] for t in sorted(acc) if tracks_meta[t][0] == tt.value]
        per_type[tt.value] = fmean(vals) if vals else None
    weighted = {"uniform": weighted_mean(acc, tracks_meta, "uniform")}
    if weighting != "uniform":
        weighted[weighting] = weighted_mean(acc, tracks_meta, weighting)
    return MetricsReport(
        per_task=dict(per_task),
        overall_accuracy=weighted["uniform"],
        overall_consistency=fmean(cons[t] for t in sorted(cons)) if cons else None,
        per_type_accuracy=per_type,
        weighted_accuracy=weighted,
        per_type_latency={},
        weighting=weighting,
    )


def score_suite(
    logs: Iterable[ResponseLog],
    tracks: Sequence[AnnotationTrack],
    judge: Judge,
    weighting: str = "uniform",
    denominator: str = AS_PAPER,
    parallelism: int = 1,
) -> MetricsReport:
    """Extrapolate, judge and aggregate every annotated task.

    Raises MissingLog when an annotated task has no log; logs for unknown
    tasks are ignored with a warning.
    """
    by_id = {log.task_id: log for log in logs}
    track_ids = {t.task_id for t in tracks}
    missing = sorted(track_ids - set(by_id))
    if missing:
        raise MissingLog(missing)
    warnings = []
    for orphan in sorted(set(by_id) - track_ids):
        msg = f"orphan log for unannotated task {orphan!r} ignored"
        logger.warning(msg)
        warnings.append(msg)
    per_task: dict[str, TaskScore] = {}
    for track in sorted(tracks, key=lambda t: t.task_id):
        log = by_id[track.task_id]
        timeline = extrapolate(log, track.n_steps)
        acc = accuracy(timeline, track, judge, parallelism)
        try:
            c_raw, c = consistency(timeline, track, denominator)
        except DegenerateTrack:
            c_raw = c = None
            warnings.append(f"{track.task_id}: single-step track excluded from consistency")
        if acc.failures:
            warnings.append(f"{track.task_id}: {acc.failures} timestep(s) could not be judged")
        if log.incomplete:
            warnings.append(f"{track.task_id}: run incomplete ({log.run_metadata.get('error', 'unknown error')})")
        lats = [r.latency for r in log.responses]
        per_task[track.task_id] = TaskScore(
            task_id=track.task_id,
            task_type=track.task_type.value,
            category=track.category,
            n_steps=track.n_steps,
            accuracy=acc.accuracy,
            consistency_raw=c_raw,
            consistency=c,
            mean_latency=fmean(lats) if lats else None,
            rubric_mean=acc.rubric_mean,
            judge_failures=acc.failures,
            responses=len(log.responses),
            incomplete=log.incomplete,
        )
    report = aggregate(per_task, {t.task_id: (t.task_type.value, t.category) for t in tracks}, weighting)
    scored_logs = [by_id[t.task_id] for t in sorted(tracks, key=lambda t: t.task_id)]
    if scored_logs:
        report.per_type_latency = latency_stats(scored_logs, {t.task_id: t.task_type for t in tracks}).per_type
    report.judge = judge.judge_id
    report.consistency_denominator = denominator
    report.warnings = warnings
    return report


def render_json(report: MetricsReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _cell(x: float | None) -> str:
    return "-" if x is None else f"{100.0 * x:.1f}"


def render_table(report: MetricsReport, title: str | None = None) -> str:
    """Markdown table: Present / Cumulative / Future / Overall / Consistency, in percent."""
    lines = []
    if title:
        lines += [f"## {title}", ""]
    types = [tt.value for tt in TaskType]
    lines.append("| Weighting | " + " | ".join(types) + " | Overall | Consistency |")
    lines.append("|---|" + "---:|" * (len(types) + 2))
    pt = [_cell(report.per_type_accuracy.get(t)) for t in types]
    lines.append(f"| Uniform | {' | '.join(pt)} | {_cell(report.overall_accuracy)} | {_cell(report.overall_consistency)} |")
    for w, value in report.weighted_accuracy.items():
        if w == "uniform":
            continue
        lines.append(f"| {WEIGHTING_LABELS[w]} | {' | '.join(pt)} | {_cell(value)} | {_cell(report.overall_consistency)} |")
    lines += ["", "| Task | Type | Category | Accuracy | Consistency | Mean latency (s) | Responses |", "|---|---|---|---:|---:|---:|---:|"]
    for tid, ts in sorted(report.per_task.items()):
        lat = "-" if ts.mean_latency is None else f"{ts.mean_latency:.2f}"
        flag = " (incomplete)" if ts.incomplete else ""
        lines.append(
            f"| {tid}{flag} | {ts.task_type} | {ts.category} | {_cell(ts.accuracy)} | {_cell(ts.consistency)} | {lat} | {ts.responses} |"
        )
    if report.per_type_latency:
        lines += ["", "| Latency (s) | " + " | ".join(types) + " |", "|---|" + "---:|" * len(types)]
        cells = ["-" if report.per_type_latency.get(t) is None else f"{report.per_type_latency[t]:.2f}" for t in types]
        lines.append("| Mean end-to-end | " + " | ".join(cells) + " |")
    lines.append("")
    lines.append(f"K = {report.k} tasks; judge = {report.judge}; consistency denominator = {report.consistency_denominator}.")
    return "\n".join(lines) + "\n"
