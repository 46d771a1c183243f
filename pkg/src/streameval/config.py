"""Run configuration, backend descriptors and suite manifests."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Mapping

from .backend import (
    Backend,
    ExactPayloadDetector,
    LatencyModel,
    MockBackend,
    MockScript,
    OverlapDetector,
    RemoteBackend,
    RemoteConfig,
    ScriptedDetector,
    SpeculativeBackend,
)
from .clock import ClockMode
from .core import AnnotationTrack, Protocol, TaskType
from .errors import ConfigError, ParseError
from .memory import MemoryConfig, Policy
from .stream import StreamConfig

BackendFactory = Callable[[AnnotationTrack], Backend]


@dataclass(frozen=True)
class SpeculativeSpec:
    detector: str = "scripted"  # scripted | exact_payload | overlap:<tau>
    verify_cost: float | None = None


@dataclass(frozen=True)
class BackendSpec:
    """Backend descriptor plus options.

    Descriptors: ``echo`` or ``echo:<latency>`` (answers with ground truth),
    ``script:<path>`` (a mock script file) and ``openai:<model>@<base_url>``.
    """

    descriptor: str = "echo"
    timeout: float | None = None
    api_key_env: str = "OPENAI_API_KEY"
    max_tokens: int | None = None
    speculative: SpeculativeSpec | None = None

    def __post_init__(self):
        kind = self.kind
        if kind not in ("echo", "script", "openai"):
            raise ConfigError(f"unknown backend descriptor {self.descriptor!r}")
        if kind == "openai":
            model, at, url = self.descriptor.partition(":")[2].partition("@")
            if not (model and at and url):
                raise ConfigError(f"remote descriptor must be 'openai:<model>@<base_url>', got {self.descriptor!r}")
        if kind == "script" and not self.descriptor.partition(":")[2]:
            raise ConfigError("script descriptor needs a path: 'script:<path>'")
        if kind == "echo" and ":" in self.descriptor:
            try:
                lat = float(self.descriptor.partition(":")[2])
            except ValueError:
                raise ConfigError(f"bad echo latency in {self.descriptor!r}") from None
            if lat < 0:
                raise ConfigError(f"echo latency must be >= 0, got {lat}")

    @property
    def kind(self) -> str:
        return self.descriptor.partition(":")[0]

    @property
    def is_remote(self) -> bool:
        return self.kind == "openai"

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"descriptor": self.descriptor}
        if self.timeout is not None:
            out["timeout"] = self.timeout
        if self.kind == "openai":
            out["api_key_env"] = self.api_key_env
            if self.max_tokens is not None:
                out["max_tokens"] = self.max_tokens
        if self.speculative is not None:
            out["speculative"] = {"detector": self.speculative.detector, "verify_cost": self.speculative.verify_cost}
        return out

    @classmethod
    def from_value(cls, value: str | Mapping[str, Any]) -> "BackendSpec":
        if isinstance(value, str):
            return cls(descriptor=value)
        if not isinstance(value, Mapping) or "descriptor" not in value:
            raise ConfigError("backend must be a descriptor string or an object with 'descriptor'")
        spec_raw = value.get("speculative")
        spec = None
        if spec_raw is not None:
            vc = spec_raw.get("verify_cost")
            spec = SpeculativeSpec(str(spec_raw.get("detector", "scripted")), None if vc is None else float(vc))
        return cls(
            descriptor=str(value["descriptor"]),
            timeout=None if value.get("timeout") is None else float(value["timeout"]),
            api_key_env=str(value.get("api_key_env", "OPENAI_API_KEY")),
            max_tokens=value.get("max_tokens"),
            speculative=spec,
        )

    def factory(self, base_dir: str | Path | None = None) -> BackendFactory:
        """Return a callable building a fresh backend for one track."""
        kind, _, arg = self.descriptor.partition(":")
        script: MockScript | None = None
        if kind == "script":
            path = Path(arg)
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            if not path.is_file():
                raise ConfigError(f"mock script not found: {path}")
            script = MockScript.load(path)

        def build(track: AnnotationTrack) -> Backend:
            if kind == "echo":
                backend: Backend = MockBackend(MockScript.echo(track, float(arg or 0.0)), backend_id=self.descriptor)
                change_steps = MockScript.echo(track).change_steps()
            elif kind == "script":
                backend = MockBackend(script, backend_id=self.descriptor)
                change_steps = script.change_steps()
            else:
                model, _, url = arg.partition("@")
                backend = RemoteBackend(RemoteConfig(
                    url, model, api_key_env=self.api_key_env,
                    timeout=self.timeout or 120.0, max_tokens=self.max_tokens,
                ))
                change_steps = MockScript.echo(track).change_steps()
            if self.speculative is None:
                return backend
            return SpeculativeBackend(
                backend, make_detector(self.speculative.detector, change_steps), self.speculative.verify_cost
            )

        return build


def make_detector(name: str, change_steps=()):
    if name == "scripted":
        return ScriptedDetector(change_steps)
    if name == "exact_payload":
        return ExactPayloadDetector()
    if name.startswith("overlap:"):
        try:
            return OverlapDetector(float(name.partition(":")[2]))
        except ValueError:
            raise ConfigError(f"bad overlap threshold in {name!r}") from None
    raise ConfigError(f"unknown change detector {name!r}")


@dataclass(frozen=True)
class TaskSelection:
    task_ids: frozenset[str] = frozenset()
    task_types: frozenset[TaskType] = frozenset()

    def matches(self, track: AnnotationTrack) -> bool:
        if self.task_ids and track.task_id not in self.task_ids:
            return False
        if self.task_types and track.task_type not in self.task_types:
            return False
        return True

    def to_dict(self) -> dict[str, Any]:
        if not self.task_ids and not self.task_types:
            return {"all": True}
        return {"ids": sorted(self.task_ids), "types": sorted(t.value for t in self.task_types)}

    @classmethod
    def from_value(cls, value: Any) -> "TaskSelection":
        if value in (None, "all") or (isinstance(value, Mapping) and value.get("all")):
            return cls()
        if not isinstance(value, Mapping):
            raise ConfigError("tasks must be 'all' or an object with 'ids' and/or 'types'")
        return cls(
            frozenset(str(i) for i in value.get("ids", [])),
            frozenset(TaskType.parse(t) for t in value.get("types", [])),
        )


@dataclass(frozen=True)
class RunConfig:
    protocol: Protocol = Protocol.ASYNC
    stream: StreamConfig = field(default_factory=StreamConfig)
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    backend: BackendSpec = field(default_factory=BackendSpec)
    tasks: TaskSelection = field(default_factory=TaskSelection)

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        if self.backend.is_remote and self.stream.clock_mode is ClockMode.VIRTUAL:
            raise ConfigError("remote backends need a wall clock; virtual time cannot govern network calls")

    def to_dict(self) -> dict[str, Any]:
        return {
            "protocol": self.protocol.value,
            "stream": {
                "camera_fps": self.stream.camera_fps,
                "camera_buffer_size": self.stream.camera_buffer_size,
                "clock_mode": self.stream.clock_mode.value,
            },
            "memory": {"context_size": self.memory.context_size, "policy": self.memory.policy.value},
            "backend": self.backend.to_dict(),
            "tasks": self.tasks.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        try:
            stream = data.get("stream", {}) or {}
            memory = data.get("memory", {}) or {}
            return cls(
                protocol=Protocol(data.get("protocol", "async")),
                stream=StreamConfig(
                    camera_fps=float(stream.get("camera_fps", 1.0)),
                    camera_buffer_size=int(stream.get("camera_buffer_size", 600)),
                    clock_mode=ClockMode(stream.get("clock_mode", "virtual")),
                ),
                memory=MemoryConfig(
                    context_size=int(memory.get("context_size", 64)),
                    policy=Policy.parse(memory.get("policy", "sw")),
                ),
                backend=BackendSpec.from_value(data.get("backend", "echo")),
                tasks=TaskSelection.from_value(data.get("tasks")),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad run config: {exc}") from None

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        """Apply flat CLI-style overrides; ``None`` values are ignored."""
        o = {k: v for k, v in overrides.items() if v is not None}
        stream = replace(
            self.stream,
            camera_fps=o.get("camera_fps", self.stream.camera_fps),
            camera_buffer_size=o.get("camera_buffer_size", self.stream.camera_buffer_size),
            clock_mode=ClockMode(o.get("clock", self.stream.clock_mode)),
        )
        memory = replace(
            self.memory,
            context_size=o.get("context_size", self.memory.context_size),
            policy=Policy.parse(o.get("policy", self.memory.policy)),
        )
        backend = self.backend
        if "backend" in o:
            backend = replace(backend, descriptor=o["backend"])
        return RunConfig(Protocol(o.get("protocol", self.protocol)), stream, memory, backend, self.tasks)


@dataclass(frozen=True)
class SuiteManifest:
    """Annotation files, per-video source descriptors, output directory and run config.

    Relative paths resolve against ``base_dir`` (the manifest's directory).
    """

    annotations: tuple[Path, ...]
    sources: Mapping[str, str]
    out_dir: Path
    run: RunConfig
    base_dir: Path
    digest: str = ""

    def resolve(self, p: str | Path) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p


def load_manifest(path: str | Path) -> SuiteManifest:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from None
    try:
        data = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: invalid manifest JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError(f"{path}: manifest must be a JSON object")
    base = path.parent.resolve()
    annotations = data.get("annotations")
    if isinstance(annotations, str):
        annotations = [annotations]
    if not isinstance(annotations, list) or not annotations:
        raise ConfigError("manifest needs a non-empty 'annotations' list")
    ann_paths = tuple(p if p.is_absolute() else base / p for p in map(Path, annotations))
    for p in ann_paths:
        if not p.is_file():
            raise ConfigError(f"annotation file not found: {p}")
    sources = data.get("sources", {})
    if not isinstance(sources, dict):
        raise ConfigError("manifest 'sources' must map video_id to a source descriptor")
    for vid, desc in sources.items():
        if isinstance(desc, str) and desc.startswith("dir:"):
            d = Path(desc[4:])
            d = d if d.is_absolute() else base / d
            if not d.is_dir():
                raise ConfigError(f"source directory for {vid!r} not found: {d}")
    out_dir = Path(data.get("out_dir", "out"))
    out_dir = out_dir if out_dir.is_absolute() else base / out_dir
    if out_dir.exists() and not out_dir.is_dir():
        raise ConfigError(f"output path exists and is not a directory: {out_dir}")
    return SuiteManifest(
        annotations=ann_paths,
        sources={str(k): str(v) for k, v in sources.items()},
        out_dir=out_dir,
        run=RunConfig.from_dict(data.get("run", {}) or {}),
        base_dir=base,
        digest=hashlib.sha256(raw).hexdigest(),
    )
