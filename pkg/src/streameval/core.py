"""Domain types and the JSON file formats for annotations and response logs.

Annotation file::

    {"tracks": [{"task_id", "video_id", "task_type", "category", "prompt",
                 "entries": [{"t": int, "caption": str}, ...]}]}

Response log::

    {"task_id", "protocol", "run_metadata": {...},
     "responses": [{"emit_time", "covered_timestep", "text", "is_pause", "latency"}]}
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .errors import ParseError, SchemaError


class TaskType(str, enum.Enum):
    PRESENT = "Present"
    CUMULATIVE = "Cumulative"
    FUTURE = "Future"

    @classmethod
    def parse(cls, value: Any, *, track_id: str | None = None) -> "TaskType":
        try:
            return cls(value)
        except ValueError:
            raise SchemaError(f"unknown task_type {value!r}", track_id=track_id, field="task_type") from None


class Protocol(str, enum.Enum):
    SYNC = "sync"
    ASYNC = "async"


@dataclass(frozen=True)
class AnnotationEntry:
    timestep: int
    caption: str

    def __post_init__(self):
        if self.timestep < 0:
            raise SchemaError(f"negative timestep {self.timestep}", field="t")


@dataclass(frozen=True)
class AnnotationTrack:
    task_id: str
    video_id: str
    task_type: TaskType
    category: str
    prompt: str
    entries: tuple[AnnotationEntry, ...]

    def __post_init__(self):
        if not self.prompt.strip():
            raise SchemaError("empty prompt", track_id=self.task_id, field="prompt")
        if not self.entries:
            raise SchemaError("track has no entries", track_id=self.task_id, field="entries")
        seen: set[int] = set()
        for e in self.entries:
            if e.timestep in seen:
                raise SchemaError(f"duplicate timestep {e.timestep}", track_id=self.task_id, field="entries")
            seen.add(e.timestep)
        for expected, e in enumerate(self.entries):
            if e.timestep != expected:
                if e.timestep > expected:
                    raise SchemaError(f"gap at timestep {expected}", track_id=self.task_id, field="entries")
                raise SchemaError(f"entries not ordered at timestep {e.timestep}", track_id=self.task_id, field="entries")

    @property
    def n_steps(self) -> int:
        return len(self.entries)

    @property
    def captions(self) -> list[str]:
        return [e.caption for e in self.entries]

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "video_id": self.video_id,
            "task_type": self.task_type.value,
            "category": self.category,
            "prompt": self.prompt,
            "entries": [{"t": e.timestep, "caption": e.caption} for e in self.entries],
        }


@dataclass(frozen=True)
class TimedResponse:
    emit_time: float
    covered_timestep: int
    text: str
    is_pause: bool = False
    latency: float = 0.0

    def __post_init__(self):
        if not (self.emit_time >= 0 and math.isfinite(self.emit_time)):
            raise SchemaError(f"emit_time must be finite and >= 0, got {self.emit_time}", field="emit_time")
        if not (self.latency >= 0 and math.isfinite(self.latency)):
            raise SchemaError(f"latency must be finite and >= 0, got {self.latency}", field="latency")
        if self.covered_timestep < 0:
            raise SchemaError(f"covered_timestep must be >= 0, got {self.covered_timestep}", field="covered_timestep")
        if self.is_pause and self.text:
            raise SchemaError("pause response must have empty text", field="text")

    def to_dict(self) -> dict[str, Any]:
        return {
            "emit_time": self.emit_time,
            "covered_timestep": self.covered_timestep,
            "text": self.text,
            "is_pause": self.is_pause,
            "latency": self.latency,
        }


@dataclass(frozen=True)
class ResponseLog:
    task_id: str
    protocol: Protocol
    responses: tuple[TimedResponse, ...]
    run_metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for prev, cur in zip(self.responses, self.responses[1:]):
            if not cur.emit_time > prev.emit_time:
                raise SchemaError(
                    f"emit_time not increasing ({prev.emit_time} then {cur.emit_time})",
                    track_id=self.task_id, field="emit_time",
                )
            if cur.covered_timestep < prev.covered_timestep:
                raise SchemaError(
                    f"covered_timestep decreasing ({prev.covered_timestep} then {cur.covered_timestep})",
                    track_id=self.task_id, field="covered_timestep",
                )

    @property
    def incomplete(self) -> bool:
        return bool(self.run_metadata.get("incomplete", False))

    def to_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "protocol": self.protocol.value,
            "run_metadata": dict(self.run_metadata),
            "responses": [r.to_dict() for r in self.responses],
        }


def _loads(document: str | bytes) -> Any:
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"document is not UTF-8: {exc}") from None
    try:
        return json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None


def _require(obj: Mapping[str, Any], key: str, kind: type | tuple[type, ...], *, track_id: str | None = None) -> Any:
    if key not in obj:
        raise SchemaError("missing field", track_id=track_id, field=key)
    value = obj[key]
    # bool is an int subclass; never accept it where a number is expected
    if isinstance(value, bool) and bool not in (kind if isinstance(kind, tuple) else (kind,)):
        raise SchemaError(f"expected {kind}, got bool", track_id=track_id, field=key)
    if not isinstance(value, kind):
        raise SchemaError(f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}", track_id=track_id, field=key)
    return value


def parse_track(raw: Mapping[str, Any]) -> AnnotationTrack:
    if not isinstance(raw, Mapping):
        raise SchemaError("track must be an object")
    task_id = _require(raw, "task_id", str)
    entries_raw = _require(raw, "entries", list, track_id=task_id)
    entries = []
    for item in entries_raw:
        if not isinstance(item, Mapping):
            raise SchemaError("entry must be an object", track_id=task_id, field="entries")
        t = _require(item, "t", int, track_id=task_id)
        caption = _require(item, "caption", str, track_id=task_id)
        if t < 0:
            raise SchemaError(f"negative timestep {t}", track_id=task_id, field="t")
        entries.append(AnnotationEntry(t, caption))
    entries.sort(key=lambda e: e.timestep)
    return AnnotationTrack(
        task_id=task_id,
        video_id=_require(raw, "video_id", str, track_id=task_id),
        task_type=TaskType.parse(_require(raw, "task_type", str, track_id=task_id), track_id=task_id),
        category=_require(raw, "category", str, track_id=task_id),
        prompt=_require(raw, "prompt", str, track_id=task_id),
        entries=tuple(entries),
    )


def validate_annotation_file(document: str | bytes) -> list[AnnotationTrack]:
    """Parse an annotation document and return its tracks, enforcing every track invariant."""
    data = _loads(document)
    if not isinstance(data, dict) or not isinstance(data.get("tracks"), list):
        raise ParseError('annotation document must be an object with a "tracks" list')
    tracks = [parse_track(raw) for raw in data["tracks"]]
    ids = [t.task_id for t in tracks]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise SchemaError(f"duplicate task_id(s) {dupes}", field="task_id")
    return tracks


def dump_annotations(tracks: Iterable[AnnotationTrack]) -> str:
    return json.dumps({"tracks": [t.to_dict() for t in tracks]}, indent=2, ensure_ascii=False) + "\n"


def load_response_log(document: str | bytes) -> ResponseLog:
    data = _loads(document)
    if not isinstance(data, dict):
        raise ParseError("response log must be a JSON object")
    task_id = _require(data, "task_id", str)
    proto_raw = _require(data, "protocol", str, track_id=task_id)
    try:
        protocol = Protocol(proto_raw)
    except ValueError:
        raise SchemaError(f"unknown protocol {proto_raw!r}", track_id=task_id, field="protocol") from None
    metadata = data.get("run_metadata", {})
    if not isinstance(metadata, dict):
        raise SchemaError("run_metadata must be an object", track_id=task_id, field="run_metadata")
    responses = []
    for item in _require(data, "responses", list, track_id=task_id):
        if not isinstance(item, Mapping):
            raise SchemaError("response must be an object", track_id=task_id, field="responses")
        try:
            responses.append(TimedResponse(
                emit_time=float(_require(item, "emit_time", (int, float), track_id=task_id)),
                covered_timestep=_require(item, "covered_timestep", int, track_id=task_id),
                text=_require(item, "text", str, track_id=task_id),
                is_pause=_require(item, "is_pause", bool, track_id=task_id),
                latency=float(_require(item, "latency", (int, float), track_id=task_id)),
            ))
        except SchemaError as exc:
            if exc.track_id is None:
                raise SchemaError(str(exc), track_id=task_id, field=exc.field) from None
            raise
    return ResponseLog(task_id, protocol, tuple(responses), metadata)


def dump_response_log(log: ResponseLog) -> str:
    return json.dumps(log.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
