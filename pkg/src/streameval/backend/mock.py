"""Deterministic scripted backend with a latency model."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from ..clock import Clock
from ..core import AnnotationTrack
from ..errors import ConfigError, ParseError
from .base import InferenceRequest, InferenceResult


@dataclass(frozen=True)
class Rule:
    start: int
    end: int  # inclusive
    text: str
    latency: float | None = None

    def __post_init__(self):
        if self.end < self.start:
            raise ConfigError(f"rule range [{self.start}, {self.end}] is empty")
        if self.latency is not None and self.latency < 0:
            raise ConfigError(f"rule latency must be >= 0, got {self.latency}")


@dataclass(frozen=True)
class LatencyModel:
    kind: str = "constant"
    c: float = 0.0
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "linear"):
            raise ConfigError(f"latency kind must be constant or linear, got {self.kind!r}")
        if min(self.c, self.a, self.b) < 0:
            raise ConfigError("latency parameters must be >= 0")

    def __call__(self, context_len: int) -> float:
        if self.kind == "constant":
            return self.c
        return self.a + self.b * context_len

    @property
    def minimum(self) -> float:
        return self.c if self.kind == "constant" else self.a + self.b


@dataclass(frozen=True)
class MockScript:
    rules: tuple[Rule, ...] = ()
    latency: LatencyModel = field(default_factory=LatencyModel)
    pause_steps: frozenset[int] = frozenset()

    def __post_init__(self):
        ordered = sorted(self.rules, key=lambda r: r.start)
        for prev, cur in zip(ordered, ordered[1:]):
            if cur.start <= prev.end:
                raise ConfigError(f"mock rules overlap: [{prev.start},{prev.end}] and [{cur.start},{cur.end}]")
        object.__setattr__(self, "rules", tuple(ordered))

    def rule_for(self, timestep: int) -> Rule | None:
        for r in self.rules:
            if r.start <= timestep <= r.end:
                return r
        return None

    def change_steps(self) -> frozenset[int]:
        """Timesteps where the scripted text differs from the previous second."""
        steps = set()
        prev = None
        last = max((r.end for r in self.rules), default=-1)
        for t in range(last + 2):
            r = self.rule_for(t)
            text = r.text if r else ""
            if t > 0 and text != prev:
                steps.add(t)
            prev = text
        return frozenset(steps)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MockScript":
        try:
            rules = tuple(
                Rule(int(r["from"]), int(r["to"]), str(r["text"]), None if r.get("latency") is None else float(r["latency"]))
                for r in data.get("rules", [])
            )
            lat = data.get("latency", {}) or {}
            latency = LatencyModel(
                kind=lat.get("kind", "constant"),
                c=float(lat.get("c", 0.0)),
                a=float(lat.get("a", 0.0)),
                b=float(lat.get("b", 0.0)),
            )
            pauses = frozenset(int(t) for t in data.get("pause_steps", []))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad mock script: {exc}") from None
        return cls(rules, latency, pauses)

    @classmethod
    def load(cls, path: str | Path) -> "MockScript":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict[str, Any]:
        rules = []
        for r in self.rules:
            item: dict[str, Any] = {"from": r.start, "to": r.end, "text": r.text}
            if r.latency is not None:
                item["latency"] = r.latency
            rules.append(item)
        return {
            "rules": rules,
            "latency": {"kind": self.latency.kind, "c": self.latency.c, "a": self.latency.a, "b": self.latency.b},
            "pause_steps": sorted(self.pause_steps),
        }

    @classmethod
    def echo(cls, track: AnnotationTrack, latency: LatencyModel | float = 0.0) -> "MockScript":
        """Script that answers every second with that second's ground-truth caption."""
        if not isinstance(latency, LatencyModel):
            latency = LatencyModel("constant", c=float(latency))
        rules = []
        for e in track.entries:
            if rules and rules[-1].text == e.caption and rules[-1].end == e.timestep - 1:
                rules[-1] = Rule(rules[-1].start, e.timestep, e.caption)
            else:
                rules.append(Rule(e.timestep, e.timestep, e.caption))
        return cls(tuple(rules), latency)


class MockBackend:
    """Answers from a :class:`MockScript` keyed on the newest context frame's timestep.

    On a wall clock it sleeps for the modelled latency, so it can stand in for
    a real model in timing tests.
    """

    is_remote = False

    def __init__(self, script: MockScript, backend_id: str = "mock", verify_cost: float | None = None):
        self.script = script
        self.backend_id = backend_id
        self.verify_cost = verify_cost
        self.generate_calls = 0
        self.verify_calls = 0

    def generate(self, req: InferenceRequest, clock: Clock) -> InferenceResult:
        self.generate_calls += 1
        t = req.covered_timestep
        rule = self.script.rule_for(t)
        latency = rule.latency if rule is not None and rule.latency is not None else self.script.latency(len(req.context))
        if not clock.is_virtual and latency > 0:
            time.sleep(latency)
        if t in self.script.pause_steps:
            return InferenceResult("", is_pause=True, latency=latency, token_count=0)
        text = rule.text if rule is not None else ""
        return InferenceResult(text, latency=latency, token_count=len(text.split()))

    def verify(self, req: InferenceRequest, draft: str, clock: Clock) -> float:
        """Cost of a verification pass over ``draft``; only used when configured."""
        if self.verify_cost is None:
            raise ConfigError(f"{self.backend_id} has no verify cost configured")
        self.verify_calls += 1
        if not clock.is_virtual and self.verify_cost > 0:
            time.sleep(self.verify_cost)
        return self.verify_cost
