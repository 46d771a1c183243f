"""Deterministic synthetic suites: annotations, a manifest and mock scripts."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .backend import LatencyModel, MockScript, Rule
from .core import AnnotationEntry, AnnotationTrack, TaskType, dump_annotations
from .errors import ConfigError

KINDS = ("smoke", "tradeoff", "buffer-drop", "static")

# Segment captions share no content words, so a stale answer is judged wrong.
SEGMENT_CAPTIONS = (
    "rinse the carrots",
    "peel potatoes",
    "chop an onion",
    "heat olive oil",
    "stir tomato sauce",
    "boil pasta water",
    "grate cheddar cheese",
    "whisk two eggs",
    "slice fresh bread",
    "pour orange juice",
    "wipe kitchen counter",
    "wash dirty dishes",
)


def _track(task_id: str, video_id: str, task_type: TaskType, category: str, prompt: str, captions: list[str]) -> AnnotationTrack:
    entries = tuple(AnnotationEntry(i, c) for i, c in enumerate(captions))
    return AnnotationTrack(task_id, video_id, task_type, category, prompt, entries)


def smoke_tracks() -> list[AnnotationTrack]:
    """Three 10-second tracks, one per task type."""
    present = ["rinse the carrots"] * 3 + ["peel potatoes"] * 4 + ["chop an onion"] * 3
    cumulative = [f"{n} carrots rinsed so far" for n in (0, 0, 1, 1, 2, 2, 3, 3, 3, 4)]
    future = ["next the cook will peel potatoes"] * 5 + ["next the cook will chop an onion"] * 5
    return [
        _track("smoke-cumulative", "kitchen", TaskType.CUMULATIVE, "counting",
               "How many carrots have been rinsed so far?", cumulative),
        _track("smoke-future", "kitchen", TaskType.FUTURE, "anticipation",
               "What will the cook do next?", future),
        _track("smoke-present", "kitchen", TaskType.PRESENT, "activity",
               "What is the person doing right now?", present),
    ]


def tradeoff_tracks(seconds: int = 60, segment: int = 5) -> list[AnnotationTrack]:
    """One track whose caption changes every ``segment`` seconds."""
    captions = [SEGMENT_CAPTIONS[(i // segment) % len(SEGMENT_CAPTIONS)] for i in range(seconds)]
    return [_track("tradeoff", "tradeoff-video", TaskType.PRESENT, "activity",
                   "What is the person doing right now?", captions)]


def buffer_drop_tracks() -> list[AnnotationTrack]:
    captions = [f"frame {i} shows step {i}" for i in range(10)]
    return [_track("buffer-drop", "buffer-video", TaskType.PRESENT, "activity",
                   "What is happening right now?", captions)]


def static_tracks(seconds: int = 30) -> list[AnnotationTrack]:
    return [_track("static", "static-video", TaskType.PRESENT, "activity",
                   "What is the person doing right now?", ["knead bread dough"] * seconds)]


def buffer_drop_script(latency: float = 5.0) -> MockScript:
    track = buffer_drop_tracks()[0]
    rules = tuple(Rule(e.timestep, e.timestep, e.caption) for e in track.entries)
    return MockScript(rules, LatencyModel("constant", c=latency))


def fixture_tracks(kind: str) -> list[AnnotationTrack]:
    builders = {"smoke": smoke_tracks, "tradeoff": tradeoff_tracks, "buffer-drop": buffer_drop_tracks, "static": static_tracks}
    if kind not in builders:
        raise ConfigError(f"unknown fixture kind {kind!r}; expected one of {', '.join(KINDS)}")
    return builders[kind]()


def fixture_manifest(kind: str, tracks: list[AnnotationTrack]) -> dict[str, Any]:
    sources = {t.video_id: f"synthetic:{t.n_steps}" for t in tracks}
    run: dict[str, Any] = {
        "protocol": "async",
        "stream": {"camera_fps": 1.0, "camera_buffer_size": 600, "clock_mode": "virtual"},
        "memory": {"context_size": 64, "policy": "sw"},
        "backend": "echo",
    }
    if kind == "tradeoff":
        run["backend"] = "echo:2"
    elif kind == "buffer-drop":
        run["stream"]["camera_buffer_size"] = 2
        run["backend"] = "script:scripts/buffer-drop.json"
    elif kind == "static":
        run["backend"] = {"descriptor": "echo:5.8", "speculative": {"detector": "scripted", "verify_cost": 1.5}}
    return {"annotations": ["annotations.json"], "sources": sources, "out_dir": "logs", "run": run}


def write_fixture(kind: str, out_dir: str | Path, force: bool = False) -> list[Path]:
    """Write ``annotations.json``, ``manifest.json`` and any mock scripts; return the paths."""
    tracks = fixture_tracks(kind)
    out = Path(out_dir)
    if out.exists() and not out.is_dir():
        raise ConfigError(f"{out} exists and is not a directory")
    if out.is_dir() and any(out.iterdir()) and not force:
        raise ConfigError(f"{out} is not empty; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    written = []
    ann = out / "annotations.json"
    ann.write_text(dump_annotations(tracks), encoding="utf-8")
    written.append(ann)
    if kind == "buffer-drop":
        scripts = out / "scripts"
        scripts.mkdir(exist_ok=True)
        script = scripts / "buffer-drop.json"
        script.write_text(json.dumps(buffer_drop_script().to_dict(), indent=2) + "\n", encoding="utf-8")
        written.append(script)
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps(fixture_manifest(kind, tracks), indent=2) + "\n", encoding="utf-8")
    written.append(manifest)
    return written
