"""Latency-aware evaluation harness for streaming video-language models."""

from .core import AnnotationEntry, AnnotationTrack, Protocol, ResponseLog, TaskType, TimedResponse
from .config import BackendSpec, RunConfig, SuiteManifest, load_manifest
from .protocol import run_async, run_suite, run_sync, run_task

__version__ = "0.1.0"

__all__ = [
    "AnnotationEntry", "AnnotationTrack", "Protocol", "ResponseLog", "TaskType", "TimedResponse",
    "BackendSpec", "RunConfig", "SuiteManifest", "load_manifest",
    "run_async", "run_suite", "run_sync", "run_task",
]
