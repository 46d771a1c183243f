"""Synchronous and asynchronous protocol runners.

Synchronous: the stream waits for the model.  Second ``i`` is presented at
``max(i, previous emit)`` on a logical lockstep clock, so latency is recorded
but never changes which frames the model sees.

Asynchronous: a camera process and a model process share a bounded
drop-oldest buffer.  Whenever the model is free it drains every pending frame,
updates memory, selects a context and infers; the response is attributed to
the newest drained second and emitted when inference completes.  New
inferences start only before the stream's end time (``N_t`` seconds); one
already in flight at that point is allowed to finish.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

from .backend import Backend, InferenceRequest, SpeculativeBackend, infer
from .clock import ClockMode, Sleep, StreamSignal, VirtualClock, WaitFrame, WallClock, make_clock, run_virtual, run_wall
from .config import BackendFactory, RunConfig
from .core import AnnotationTrack, Protocol, ResponseLog, TimedResponse, dump_response_log
from .errors import ConfigError, HarnessError
from .memory import MemoryBuffer, ingest, select_context
from .stream import CameraBuffer, FrameSource, StreamSummary, camera_process

logger = logging.getLogger(__name__)

MODEL_PRIORITY = 0  # at equal instants the model acts before the camera inserts
CAMERA_PRIORITY = 1


def second_of(frame_index: int, fps: float) -> int:
    """Annotation second a frame index falls into."""
    return int(math.floor(frame_index / fps + 1e-9))


def _base_metadata(track: AnnotationTrack, cfg: RunConfig, backend: Backend) -> dict[str, Any]:
    return {
        "backend_id": backend.backend_id,
        "camera_buffer_size": cfg.stream.camera_buffer_size,
        "camera_fps": cfg.stream.camera_fps,
        "clock_mode": cfg.stream.clock_mode.value,
        "context_size": cfg.memory.context_size,
        "n_steps": track.n_steps,
        "policy": cfg.memory.policy.value,
        "protocol": cfg.protocol.value,
    }


def _backend_stats(backend: Backend) -> dict[str, Any]:
    stats: dict[str, Any] = {}
    inner = backend.inner if isinstance(backend, SpeculativeBackend) else backend
    if hasattr(inner, "generate_calls"):
        stats["generate_calls"] = inner.generate_calls
    if isinstance(backend, SpeculativeBackend):
        stats["speculative_accepts"] = backend.accepts
        stats["speculative_rejects"] = backend.rejects
    return stats


def _check_source(track: AnnotationTrack, source: FrameSource, fps: float) -> int:
    """Number of frames to stream: the annotated duration, capped by the source length."""
    wanted = int(math.ceil(track.n_steps * fps - 1e-9))
    if source.count < wanted:
        logger.warning("%s: source has %d frames, annotation needs %d", track.task_id, source.count, wanted)
    return min(source.count, wanted)


class _Truncated(FrameSource):
    def __init__(self, inner: FrameSource, count: int):
        super().__init__(inner.descriptor, count)
        self.inner = inner

    def payload(self, i: int) -> bytes:
        return self.inner.payload(i)


def run_sync(
    track: AnnotationTrack,
    source: FrameSource,
    cfg: RunConfig,
    backend: Backend | None = None,
) -> ResponseLog:
    if cfg.protocol is not Protocol.SYNC:
        raise ConfigError("run_sync needs protocol=sync")
    backend = backend or cfg.backend.factory()(track)
    fps = cfg.stream.camera_fps
    clock = make_clock(cfg.stream.clock_mode)
    n_frames = _check_source(track, source, fps)
    memory = MemoryBuffer()
    responses: list[TimedResponse] = []
    meta = _base_metadata(track, cfg, backend)
    last_emit = 0.0
    error = None
    try:
        frames = iter(source.frames(fps))
        pending = []
        for idx in range(n_frames):
            frame = next(frames)
            pending.append(frame)
            last_of_second = idx + 1 == n_frames or second_of(idx + 1, fps) != second_of(idx, fps)
            if not last_of_second:
                continue
            ingest(memory, pending, cfg.memory)
            pending = []
            second = second_of(idx, fps)
            present = max(frame.capture_time, last_emit)
            req = InferenceRequest.build(track.prompt, select_context(memory, cfg.memory), present, second)
            result = infer(backend, req, clock, cfg.backend.timeout)
            last_emit = present + result.latency
            responses.append(TimedResponse(last_emit, second, result.text, result.is_pause, result.latency))
    except HarnessError as exc:
        if isinstance(exc, ConfigError):
            raise
        error = f"{type(exc).__name__}: {exc}"
        logger.warning("%s: sync run aborted: %s", track.task_id, error)
    meta.update(_backend_stats(backend))
    meta["frames_emitted"] = len(responses)
    meta["frames_dropped"] = 0
    meta["incomplete"] = error is not None
    if error is not None:
        meta["error"] = error
    return ResponseLog(track.task_id, Protocol.SYNC, tuple(responses), meta)


@dataclass
class _ModelState:
    responses: list[TimedResponse] = field(default_factory=list)
    drains: list[list[int]] = field(default_factory=list)


def _model_process(track, cfg: RunConfig, backend: Backend, buffer: CameraBuffer, clock, horizon: float, state: _ModelState):
    fps = cfg.stream.camera_fps
    memory = MemoryBuffer()
    while True:
        if buffer.is_empty():
            if buffer.signal.ended:
                return
            yield WaitFrame()
            continue
        start = clock.now()
        if start >= horizon:
            return
        frames = buffer.drain(start)
        state.drains.append([f.timestep for f in frames])
        ingest(memory, frames, cfg.memory)
        second = second_of(frames[-1].timestep, fps)
        req = InferenceRequest.build(track.prompt, select_context(memory, cfg.memory), start, second)
        result = infer(backend, req, clock, cfg.backend.timeout)
        if clock.is_virtual:
            yield Sleep(start + result.latency)
        state.responses.append(TimedResponse(clock.now(), second, result.text, result.is_pause, result.latency))


@dataclass
class AsyncTrace:
    """Per-run detail beyond the response log (frames seen per drain, stream summary)."""

    drains: list[list[int]]
    summary: StreamSummary


def run_async(
    track: AnnotationTrack,
    source: FrameSource,
    cfg: RunConfig,
    backend: Backend | None = None,
    trace: list[AsyncTrace] | None = None,
    buffer_trace=None,
) -> ResponseLog:
    if cfg.protocol is not Protocol.ASYNC:
        raise ConfigError("run_async needs protocol=async")
    backend = backend or cfg.backend.factory()(track)
    if backend.is_remote and cfg.stream.clock_mode is ClockMode.VIRTUAL:
        raise ConfigError("remote backends need a wall clock")
    n_frames = _check_source(track, source, cfg.stream.camera_fps)
    clock = make_clock(cfg.stream.clock_mode)
    signal = StreamSignal()
    buffer = CameraBuffer(cfg.stream.camera_buffer_size, signal, trace=buffer_trace)
    summary = StreamSummary()
    state = _ModelState()
    horizon = float(track.n_steps)
    procs = [
        (MODEL_PRIORITY, _model_process(track, cfg, backend, buffer, clock, horizon, state)),
        (CAMERA_PRIORITY, camera_process(_Truncated(source, n_frames), cfg.stream, buffer, clock, summary)),
    ]
    ready = lambda: not buffer.is_empty()  # noqa: E731
    error = None
    try:
        if isinstance(clock, VirtualClock):
            run_virtual(clock, procs, signal, ready)
        else:
            assert isinstance(clock, WallClock)
            run_wall(clock, procs, signal, ready)
    except HarnessError as exc:
        if isinstance(exc, ConfigError):
            raise
        error = f"{type(exc).__name__}: {exc}"
        logger.warning("%s: async run aborted: %s", track.task_id, error)
    summary.frames_dropped = buffer.dropped_count
    meta = _base_metadata(track, cfg, backend)
    meta.update(_backend_stats(backend))
    meta.update({
        "frames_emitted": summary.frames_emitted,
        "frames_dropped": summary.frames_dropped,
        "frames_drained": buffer.drained_count,
        "frames_in_buffer": len(buffer),
        "stream_end_time": summary.end_time,
        "cadence_violations": summary.cadence_violations,
        "incomplete": error is not None,
    })
    if cfg.stream.clock_mode is ClockMode.WALL:
        meta["max_cadence_error"] = summary.max_cadence_error
    if error is not None:
        meta["error"] = error
    if trace is not None:
        trace.append(AsyncTrace(state.drains, summary))
    return ResponseLog(track.task_id, Protocol.ASYNC, tuple(state.responses), meta)


def run_task(track: AnnotationTrack, source: FrameSource, cfg: RunConfig, backend: Backend | None = None) -> ResponseLog:
    if cfg.protocol is Protocol.SYNC:
        return run_sync(track, source, cfg, backend)
    return run_async(track, source, cfg, backend)


def log_path(out_dir: str | Path, task_id: str) -> Path:
    return Path(out_dir) / f"{task_id}.responses.json"


def run_suite(
    tracks: Iterable[AnnotationTrack],
    sources: Mapping[str, FrameSource | Callable[[], FrameSource]],
    cfg: RunConfig,
    factory: BackendFactory | None = None,
    out_dir: str | Path | None = None,
    extra_metadata: Mapping[str, Any] | None = None,
) -> list[ResponseLog]:
    """Run selected tracks one after another, ordered by task_id.

    ``sources`` values may be sources or zero-argument callables opening one.
    A task that fails yields a log flagged ``incomplete``; the suite goes on.
    """
    selected = sorted((t for t in tracks if cfg.tasks.matches(t)), key=lambda t: t.task_id)
    missing = sorted({t.video_id for t in selected if t.video_id not in sources})
    if missing:
        raise ConfigError(f"no frame source for video id(s): {', '.join(missing)}")
    factory = factory or cfg.backend.factory()
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    logs = []
    for track in selected:
        src = sources[track.video_id]
        try:
            source = src() if callable(src) and not isinstance(src, FrameSource) else src
            log = run_task(track, source, cfg, factory(track))
        except ConfigError:
            raise
        except HarnessError as exc:
            log = ResponseLog(track.task_id, cfg.protocol, (), {
                "incomplete": True, "error": f"{type(exc).__name__}: {exc}", "protocol": cfg.protocol.value,
            })
        if extra_metadata:
            log = ResponseLog(log.task_id, log.protocol, log.responses, {**log.run_metadata, **extra_metadata})
        if out_dir is not None:
            log_path(out_dir, track.task_id).write_text(dump_response_log(log), encoding="utf-8")
        logs.append(log)
    return logs
