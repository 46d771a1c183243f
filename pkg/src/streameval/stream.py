"""Frame sources, the bounded drop-oldest camera buffer, and the camera process."""

from __future__ import annotations

import json
import threading
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterator, TextIO

from .clock import Clock, ClockMode, Process, Sleep, StreamSignal, VirtualClock, WallClock, run_virtual, run_wall
from .errors import ConfigError, EmptySource, SourceNotFound

CADENCE_TOLERANCE = 0.05  # seconds, per frame


@dataclass(frozen=True)
class Frame:
    timestep: int
    capture_time: float
    payload: bytes = field(repr=False)


@dataclass(frozen=True)
class StreamConfig:
    camera_fps: float = 1.0
    camera_buffer_size: int = 600
    clock_mode: ClockMode = ClockMode.VIRTUAL

    def __post_init__(self):
        if not self.camera_fps > 0:
            raise ConfigError(f"camera_fps must be > 0, got {self.camera_fps}")
        if self.camera_buffer_size < 1:
            raise ConfigError(f"camera_buffer_size must be >= 1, got {self.camera_buffer_size}")
        object.__setattr__(self, "clock_mode", ClockMode(self.clock_mode))


class CameraBuffer:
    """Thread-safe bounded FIFO; inserting into a full buffer evicts the oldest frame.

    ``trace`` optionally receives JSON lines ``{"event", "t", "timestep"}`` for
    every insert, drop and drained frame.
    """

    def __init__(self, capacity: int, signal: StreamSignal | None = None, trace: TextIO | None = None):
        if capacity < 1:
            raise ConfigError(f"camera buffer capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.signal = signal or StreamSignal()
        self._frames: deque[Frame] = deque()
        self._lock = threading.Lock()
        self.dropped_count = 0
        self.inserted_count = 0
        self.drained_count = 0
        self._trace = trace

    def __len__(self) -> int:
        with self._lock:
            return len(self._frames)

    def is_empty(self) -> bool:
        return len(self) == 0

    def snapshot(self) -> list[Frame]:
        with self._lock:
            return list(self._frames)

    def _emit(self, event: str, t: float, timestep: int) -> None:
        if self._trace is not None:
            self._trace.write(json.dumps({"event": event, "t": t, "timestep": timestep}) + "\n")

    def insert(self, frame: Frame, now: float | None = None) -> Frame | None:
        """Append ``frame``; return the evicted frame if the buffer was full."""
        t = frame.capture_time if now is None else now
        evicted = None
        with self._lock:
            self._frames.append(frame)
            self.inserted_count += 1
            self._emit("insert", t, frame.timestep)
            if len(self._frames) > self.capacity:
                evicted = self._frames.popleft()
                self.dropped_count += 1
                self._emit("drop", t, evicted.timestep)
        self.signal.notify()
        return evicted

    def drain(self, now: float | None = None) -> list[Frame]:
        with self._lock:
            frames = list(self._frames)
            self._frames.clear()
            self.drained_count += len(frames)
            for f in frames:
                self._emit("drain", f.capture_time if now is None else now, f.timestep)
        return frames


def drain_pending(buffer: CameraBuffer, now: float | None = None) -> list[Frame]:
    """Remove and return every buffered frame, oldest first."""
    return buffer.drain(now)


class FrameSource:
    """A finite, ordered, re-iterable sequence of frame payloads."""

    def __init__(self, descriptor: str, count: int):
        self.descriptor = descriptor
        self.count = count

    def __len__(self) -> int:
        return self.count

    def payload(self, i: int) -> bytes:
        raise NotImplementedError

    def frames(self, fps: float = 1.0) -> Iterator[Frame]:
        """Yield frames with nominal capture times ``i / fps``; payloads load lazily."""
        for i in range(self.count):
            yield Frame(timestep=i, capture_time=i / fps, payload=self.payload(i))

    def __iter__(self) -> Iterator[Frame]:
        return self.frames()


class SyntheticSource(FrameSource):
    def __init__(self, count: int, pattern: str = "f{i}"):
        if count < 1:
            raise EmptySource(f"synthetic source needs count >= 1, got {count}")
        super().__init__(f"synthetic:{count}", count)
        self.pattern = pattern

    def payload(self, i: int) -> bytes:
        return self.pattern.format(i=i).encode("utf-8")


class DirectorySource(FrameSource):
    def __init__(self, path: str | Path):
        root = Path(path)
        if not root.is_dir():
            raise SourceNotFound(f"frame directory not found: {root}")
        files = sorted((p for p in root.iterdir() if p.is_file() and not p.name.startswith(".")), key=lambda p: p.name)
        if not files:
            raise EmptySource(f"frame directory is empty: {root}")
        super().__init__(f"dir:{root}", len(files))
        self.files = files

    def payload(self, i: int) -> bytes:
        return self.files[i].read_bytes()


def open_frame_source(descriptor: str, base_dir: str | Path | None = None) -> FrameSource:
    """Open ``dir:<path>`` (files in lexicographic order) or ``synthetic:<count>``."""
    kind, sep, arg = descriptor.partition(":")
    if not sep:
        raise ConfigError(f"source descriptor must be 'dir:<path>' or 'synthetic:<count>', got {descriptor!r}")
    if kind == "synthetic":
        try:
            count = int(arg)
        except ValueError:
            raise ConfigError(f"bad synthetic frame count {arg!r}") from None
        return SyntheticSource(count)
    if kind == "dir":
        path = Path(arg)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        return DirectorySource(path)
    raise ConfigError(f"unknown source kind {kind!r}")


@dataclass
class StreamSummary:
    frames_emitted: int = 0
    frames_dropped: int = 0
    end_time: float = 0.0
    cadence_violations: int = 0
    max_cadence_error: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "frames_emitted": self.frames_emitted,
            "frames_dropped": self.frames_dropped,
            "end_time": self.end_time,
            "cadence_violations": self.cadence_violations,
            "max_cadence_error": self.max_cadence_error,
        }


def camera_process(
    source: FrameSource,
    cfg: StreamConfig,
    buffer: CameraBuffer,
    clock: Clock,
    summary: StreamSummary,
) -> Process:
    """Producer loop: frame ``i`` enters the buffer at ``i / camera_fps``.

    Deadlines are absolute, so time spent reading a payload or inserting is
    absorbed instead of accumulating as drift.
    """
    start = clock.now()
    try:
        for frame in source.frames(cfg.camera_fps):
            target = start + frame.timestep / cfg.camera_fps
            yield Sleep(target)
            if buffer.signal.ended:  # consumer failed
                break
            now = clock.now()
            error = abs(now - target)
            summary.max_cadence_error = max(summary.max_cadence_error, error)
            if error > CADENCE_TOLERANCE:
                summary.cadence_violations += 1
            buffer.insert(replace(frame, capture_time=now), now)
            summary.frames_emitted += 1
            summary.end_time = now
    finally:
        summary.frames_dropped = buffer.dropped_count
        buffer.signal.end()


def run_camera_process(source: FrameSource, cfg: StreamConfig, buffer: CameraBuffer, clock: Clock) -> StreamSummary:
    """Run the camera alone (no consumer) until the last frame is inserted."""
    summary = StreamSummary()
    proc = camera_process(source, cfg, buffer, clock, summary)
    if isinstance(clock, VirtualClock):
        run_virtual(clock, [(1, proc)], buffer.signal)
    elif isinstance(clock, WallClock):
        run_wall(clock, [(1, proc)], buffer.signal)
    else:
        raise ConfigError(f"unsupported clock {clock!r}")
    return summary
