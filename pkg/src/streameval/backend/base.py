"""Backend contract shared by mocks, remote clients and wrappers."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Protocol, Sequence, runtime_checkable

from ..clock import Clock
from ..errors import BackendTimeout, ConfigError
from ..stream import Frame


@dataclass(frozen=True)
class InferenceRequest:
    prompt: str
    context: tuple[Frame, ...]
    request_time: float = 0.0
    covered_timestep: int | None = None

    def __post_init__(self):
        if not self.context:
            raise ConfigError("inference request needs at least one context frame")
        ts = [f.timestep for f in self.context]
        if ts != sorted(ts) or len(set(ts)) != len(ts):
            raise ConfigError(f"context frames out of capture order: {ts}")
        if self.covered_timestep is None:
            object.__setattr__(self, "covered_timestep", self.context[-1].timestep)

    @property
    def newest(self) -> Frame:
        return self.context[-1]

    @classmethod
    def build(
        cls, prompt: str, context: Sequence[Frame], request_time: float = 0.0, covered_timestep: int | None = None
    ) -> "InferenceRequest":
        return cls(prompt, tuple(context), request_time, covered_timestep)


@dataclass(frozen=True)
class InferenceResult:
    text: str
    is_pause: bool = False
    latency: float = 0.0
    token_count: int = 0

    def __post_init__(self):
        if self.latency < 0:
            raise ConfigError(f"negative latency {self.latency}")
        if self.is_pause and self.text:
            raise ConfigError("pause result must have empty text")


@runtime_checkable
class Backend(Protocol):
    """Anything with ``generate(req, clock) -> InferenceResult``.

    In virtual mode ``generate`` must return immediately and report its latency
    from a model; in wall mode it may block, and the measured time wins.
    """

    backend_id: str
    is_remote: bool

    def generate(self, req: InferenceRequest, clock: Clock) -> InferenceResult: ...


def infer(backend: Backend, req: InferenceRequest, clock: Clock, timeout: float | None = None) -> InferenceResult:
    """Run one inference and normalise its latency to the run's clock.

    Wall mode replaces the backend-reported latency with the elapsed wall time.
    Virtual mode keeps the modelled latency; advancing the clock is the
    caller's job.
    """
    if clock.is_virtual:
        result = backend.generate(req, clock)
    else:
        t0 = time.perf_counter()
        result = backend.generate(req, clock)
        result = replace(result, latency=time.perf_counter() - t0)
    if timeout is not None and result.latency > timeout:
        raise BackendTimeout(f"{backend.backend_id}: inference took {result.latency:.3f}s, ceiling {timeout}s")
    return result
