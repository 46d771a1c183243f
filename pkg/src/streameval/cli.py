"""Command-line entry point: ``streameval {run,score,fixtures,validate}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Sequence

from .config import load_manifest
from .core import load_response_log, validate_annotation_file
from .errors import ConfigError, HarnessError, MissingLog, ParseError
from .fixtures import KINDS, write_fixture
from .metrics import WEIGHTINGS, CachedJudge, make_judge, render_json, render_table, score_suite
from .metrics.scores import AS_PAPER, N_MINUS_1
from .backend import MockScript
from .protocol import log_path, run_suite
from .stream import open_frame_source

logger = logging.getLogger("streameval")

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("common options")
    g.add_argument("--manifest", type=Path, help="suite manifest (JSON)")
    g.add_argument("--out", type=Path, help="output directory (overrides the manifest's out_dir)")
    g.add_argument("--protocol", choices=["sync", "async"])
    g.add_argument("--policy", help="memory policy: sw, u or sw+u")
    g.add_argument("--context-size", type=int, help="frames per inference (k)")
    g.add_argument("--camera-buffer-size", type=int)
    g.add_argument("--camera-fps", type=float)
    g.add_argument("--clock", choices=["wall", "virtual"])
    g.add_argument("--backend", help="echo[:latency] | script:<path> | openai:<model>@<base_url>")
    g.add_argument("--judge", default="oracle", help="oracle | openai:<model>@<base_url> (default: oracle)")
    g.add_argument("--weighting", choices=WEIGHTINGS, default="uniform")
    g.add_argument("--force", action="store_true", help="allow writing into a non-empty directory")
    g.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streameval", description="Streaming video-language model evaluation harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a suite and write one response log per task")
    _common(p)

    p = sub.add_parser("score", help="score response logs against annotations")
    _common(p)
    p.add_argument("--logs", type=Path, help="directory of <task_id>.responses.json (default: manifest out_dir)")
    p.add_argument("--annotations", type=Path, nargs="+", help="annotation file(s) (default: from manifest)")
    p.add_argument("--denominator", choices=[AS_PAPER, N_MINUS_1], default=AS_PAPER,
                   help="consistency prefactor: 1/N (as_paper) or 1/(N-1)")
    p.add_argument("--parallelism", type=int, default=1, help="concurrent judge calls")
    p.add_argument("--judge-cache", type=Path, help="JSON file persisting judge verdicts")

    p = sub.add_parser("fixtures", help="write a synthetic suite")
    _common(p)
    p.add_argument("kind", choices=KINDS)
    p.add_argument("directory", type=Path)

    p = sub.add_parser("validate", help="check annotation files, response logs, mock scripts and manifests")
    _common(p)
    p.add_argument("paths", type=Path, nargs="+")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    keys = ("protocol", "policy", "context_size", "camera_buffer_size", "camera_fps", "clock", "backend")
    return {k: getattr(args, k) for k in keys if getattr(args, k) is not None}


def _load_tracks(paths: Sequence[Path]):
    tracks = []
    for p in paths:
        try:
            tracks.extend(validate_annotation_file(Path(p).read_bytes()))
        except OSError as exc:
            raise ConfigError(f"cannot read {p}: {exc}") from None
        except HarnessError as exc:
            raise type(exc)(f"{p}: {exc}") from None
    ids = [t.task_id for t in tracks]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ConfigError(f"task id(s) defined in several annotation files: {dupes}")
    return tracks


def _ensure_writable(out: Path, force: bool, pattern: str) -> None:
    if out.is_dir() and not force and any(out.glob(pattern)):
        raise ConfigError(f"{out} already holds {pattern} files; pass --force to overwrite")


def cmd_run(args: argparse.Namespace) -> int:
    if args.manifest is None:
        raise ConfigError("run needs --manifest")
    manifest = load_manifest(args.manifest)
    overrides = _overrides(args)
    cfg = manifest.run.with_overrides(overrides)
    out = args.out or manifest.out_dir
    _ensure_writable(out, args.force, "*.responses.json")
    tracks = _load_tracks(manifest.annotations)
    sources = {
        vid: (lambda d=desc: open_frame_source(d, manifest.base_dir)) for vid, desc in manifest.sources.items()
    }
    factory = cfg.backend.factory(manifest.base_dir)
    echo = {"manifest_digest": manifest.digest, "overrides": dict(sorted(overrides.items())), "run_config": cfg.to_dict()}
    started = time.perf_counter()
    logs = run_suite(tracks, sources, cfg, factory, out_dir=out, extra_metadata=echo)
    elapsed = time.perf_counter() - started
    tasks = {}
    for log in logs:
        md = log.run_metadata
        tasks[log.task_id] = {
            "incomplete": log.incomplete,
            "error": md.get("error"),
            "responses": len(log.responses),
            "frames_dropped": md.get("frames_dropped"),
            "frames_emitted": md.get("frames_emitted"),
            "stream_end_time": md.get("stream_end_time"),
            "last_emit_time": log.responses[-1].emit_time if log.responses else None,
            "generate_calls": md.get("generate_calls"),
            "speculative_accepts": md.get("speculative_accepts"),
            "speculative_rejects": md.get("speculative_rejects"),
            "cadence_violations": md.get("cadence_violations"),
        }
    failed = sorted(t for t, s in tasks.items() if s["incomplete"])
    summary = {**echo, "elapsed_seconds": round(elapsed, 3), "failed_tasks": failed, "tasks": tasks}
    (out / "run_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"ran {len(logs)} task(s) with protocol={cfg.protocol.value} clock={cfg.stream.clock_mode.value}; logs in {out}")
    for tid in failed:
        print(f"  FAILED {tid}: {tasks[tid]['error']}", file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest) if args.manifest else None
    if args.annotations:
        ann_paths = args.annotations
    elif manifest:
        ann_paths = list(manifest.annotations)
    else:
        raise ConfigError("score needs --annotations or --manifest")
    logs_dir = args.logs or (manifest.out_dir if manifest else None)
    if logs_dir is None:
        raise ConfigError("score needs --logs or --manifest")
    if not Path(logs_dir).is_dir():
        raise ConfigError(f"log directory not found: {logs_dir}")
    tracks = _load_tracks(ann_paths)
    logs = []
    for p in sorted(Path(logs_dir).glob("*.responses.json")):
        logs.append(load_response_log(p.read_bytes()))
    judge = make_judge(args.judge)
    if args.judge_cache:
        judge = CachedJudge(judge, args.judge_cache)
    report = score_suite(logs, tracks, judge, args.weighting, args.denominator, args.parallelism)
    if isinstance(judge, CachedJudge):
        judge.save()
    out = args.out or Path(logs_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(render_json(report), encoding="utf-8")
    table = render_table(report)
    (out / "report.md").write_text(table, encoding="utf-8")
    print(table, end="")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_fixtures(args: argparse.Namespace) -> int:
    written = write_fixture(args.kind, args.directory, force=args.force)
    for p in written:
        print(p)
    return EXIT_OK


def _validate_one(path: Path) -> str:
    data = path.read_bytes()
    if path.name.endswith(".responses.json"):
        log = load_response_log(data)
        return f"response log for {log.task_id} ({len(log.responses)} responses)"
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if isinstance(doc, dict) and "tracks" in doc:
        tracks = validate_annotation_file(data)
        return f"annotations, {len(tracks)} track(s)"
    if isinstance(doc, dict) and "rules" in doc:
        script = MockScript.from_dict(doc)
        return f"mock script, {len(script.rules)} rule(s)"
    if isinstance(doc, dict) and "annotations" in doc:
        m = load_manifest(path)
        return f"manifest, {len(m.annotations)} annotation file(s)"
    if isinstance(doc, dict) and "responses" in doc:
        log = load_response_log(data)
        return f"response log for {log.task_id} ({len(log.responses)} responses)"
    raise ParseError("unrecognised document (expected annotations, response log, mock script or manifest)")


def cmd_validate(args: argparse.Namespace) -> int:
    files: list[Path] = []
    for p in args.paths:
        if p.is_dir():
            found = sorted(q for q in p.rglob("*.json") if q.name not in ("report.json", "run_summary.json"))
            files.extend(found)
        else:
            files.append(p)
    bad = 0
    for f in files:
        try:
            what = _validate_one(f)
        except OSError as exc:
            bad += 1
            print(f"INVALID {f}: cannot read: {exc.strerror or exc}")
        except HarnessError as exc:
            bad += 1
            print(f"INVALID {f}: {exc}")
        else:
            print(f"ok      {f}: {what}")
    print(f"{len(files) - bad} valid, {bad} invalid")
    return EXIT_CONFIG if bad or not files else EXIT_OK


COMMANDS = {"run": cmd_run, "score": cmd_score, "fixtures": cmd_fixtures, "validate": cmd_validate}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except MissingLog as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HarnessError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
