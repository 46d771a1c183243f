"""Self-speculative wrapper: reuse the previous answer as a draft when the scene is unchanged.

Verification inside a real VLM is a parallel forward pass over the draft
tokens.  The harness cannot reach model internals, so acceptance is decided by
a :class:`ChangeDetector` and costs either a fixed verify latency or whatever
the wrapped backend's ``verify`` hook reports.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterable

from ..clock import Clock
from ..errors import ConfigError
from .base import Backend, InferenceRequest, InferenceResult, infer


class ChangeDetector:
    strategy: str

    def accepts(self, prior: InferenceRequest, current: InferenceRequest) -> bool:
        raise NotImplementedError


class ExactPayloadDetector(ChangeDetector):
    strategy = "exact_payload"

    def accepts(self, prior, current):
        return prior.newest.payload == current.newest.payload


class ScriptedDetector(ChangeDetector):
    """Rejects the draft iff a scripted scene change lies in ``(prior_t, current_t]``."""

    strategy = "scripted"

    def __init__(self, change_steps: Iterable[int] = ()):
        self.change_steps = frozenset(change_steps)

    def accepts(self, prior, current):
        lo, hi = prior.covered_timestep, current.covered_timestep
        return not any(lo < t <= hi for t in self.change_steps)


class OverlapDetector(ChangeDetector):
    """Accepts when the fraction of equal bytes (position-wise, over the longer payload) is >= tau."""

    strategy = "overlap"

    def __init__(self, tau: float):
        if not 0.0 <= tau <= 1.0:
            raise ConfigError(f"overlap threshold must be in [0, 1], got {tau}")
        self.tau = tau

    @staticmethod
    def overlap(a: bytes, b: bytes) -> float:
        longest = max(len(a), len(b))
        if longest == 0:
            return 1.0
        return sum(x == y for x, y in zip(a, b)) / longest

    def accepts(self, prior, current):
        return self.overlap(prior.newest.payload, current.newest.payload) >= self.tau


@dataclass(frozen=True)
class Draft:
    """The previous request and the answer it produced."""

    request: InferenceRequest
    result: InferenceResult


class SpeculativeBackend:
    is_remote = False

    def __init__(self, inner: Backend, detector: ChangeDetector, verify_cost: float | None = None):
        if verify_cost is not None and verify_cost < 0:
            raise ConfigError(f"verify cost must be >= 0, got {verify_cost}")
        if verify_cost is None and not hasattr(inner, "verify"):
            raise ConfigError(f"{inner.backend_id} has no verify hook; set a constant verify cost")
        self.inner = inner
        self.detector = detector
        self.verify_cost = verify_cost
        self.is_remote = inner.is_remote
        self.backend_id = f"speculative({inner.backend_id})"
        self.accepts = 0
        self.rejects = 0
        self._draft: Draft | None = None

    def _verify_latency(self, req: InferenceRequest, draft: str, clock: Clock) -> float:
        if self.verify_cost is None:
            return self.inner.verify(req, draft, clock)
        if not clock.is_virtual and self.verify_cost > 0:
            time.sleep(self.verify_cost)
        return self.verify_cost

    def generate(self, req: InferenceRequest, clock: Clock) -> InferenceResult:
        result, _ = infer_speculative(self, req, self._draft, clock)
        self._draft = Draft(req, result)
        return result

    def reset(self) -> None:
        self._draft = None


def infer_speculative(
    wrapper: SpeculativeBackend,
    req: InferenceRequest,
    prior: Draft | None,
    clock: Clock,
) -> tuple[InferenceResult, bool]:
    """Return ``(result, accepted)``; on accept the wrapped generate path is not called."""
    if prior is not None and not prior.result.is_pause and wrapper.detector.accepts(prior.request, req):
        latency = wrapper._verify_latency(req, prior.result.text, clock)
        wrapper.accepts += 1
        return InferenceResult(prior.result.text, latency=latency, token_count=0), True
    wrapper.rejects += 1
    return infer(wrapper.inner, req, clock), False
