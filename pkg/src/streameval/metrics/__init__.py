"""Scoring: extrapolation, judging, accuracy, consistency, latency and aggregates."""

from .judge import (
    CachedJudge,
    Judge,
    JudgeVerdict,
    LLMJudge,
    OracleJudge,
    fill_prompt,
    judge,
    load_prompt_template,
    make_judge,
    normalize_tokens,
    parse_verdict,
)
from .report import (
    WEIGHTINGS,
    MetricsReport,
    TaskScore,
    aggregate,
    render_json,
    render_table,
    score_suite,
    task_weights,
)
from .scores import (
    AS_PAPER,
    N_MINUS_1,
    AccuracyResult,
    LatencyStats,
    accuracy,
    consistency,
    latency_stats,
    lcs_distance,
    longest_common_substring,
)
from .timeline import Origin, Timeline, extrapolate, timeline_to_log

__all__ = [name for name in dir() if not name.startswith("_")]
