"""Judges: a deterministic token-overlap oracle and an LLM judge over chat completions."""

from __future__ import annotations

import ast
import hashlib
import json
import logging
import re
import threading
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Protocol

from ..backend.remote import ChatClient, RemoteConfig
from ..errors import BackendError, ConfigError, JudgeUnavailable, MalformedVerdict

logger = logging.getLogger(__name__)

STOPWORDS = frozenset(
    "a an the of in on at to for with and or by from into onto as is are was were be been it its this that these those".split()
)
_PUNCT = re.compile(r"[^\w\s]", re.UNICODE)


def load_prompt_template() -> str:
    return resources.files(__package__).joinpath("judge_prompt.txt").read_text(encoding="utf-8")


def fill_prompt(template: str, question: str, gt_answer: str, model_response: str) -> str:
    return (
        template.replace("<question>", question)
        .replace("<gt_answer>", gt_answer)
        .replace("<model_response>", model_response)
    )


def normalize_tokens(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return _PUNCT.sub("", text.lower()).split()


def content_tokens(text: str) -> set[str]:
    return {t for t in normalize_tokens(text) if t not in STOPWORDS}


@dataclass(frozen=True)
class JudgeVerdict:
    pred: bool
    rubric: int

    def __post_init__(self):
        if isinstance(self.rubric, bool) or not isinstance(self.rubric, int) or not 0 <= self.rubric <= 3:
            raise MalformedVerdict(f"rubric must be an integer in 0..3, got {self.rubric!r}")
        if self.rubric == 3 and not self.pred:
            raise MalformedVerdict("rubric 3 requires pred=yes")
        if self.rubric <= 1 and self.pred:
            raise MalformedVerdict(f"rubric {self.rubric} requires pred=no")

    @property
    def score(self) -> int:
        return int(self.pred)

    def to_dict(self) -> dict[str, Any]:
        return {"pred": "yes" if self.pred else "no", "score": self.rubric}


def parse_verdict(reply: str) -> JudgeVerdict:
    """Parse ``{'pred': 'yes'|'no', 'score': 0..3}`` from a judge reply (JSON or Python-literal quoting)."""
    start, end = reply.find("{"), reply.rfind("}")
    if start < 0 or end <= start:
        raise MalformedVerdict(f"no JSON object in judge reply: {reply[:120]!r}")
    blob = reply[start : end + 1]
    try:
        data = json.loads(blob)
    except json.JSONDecodeError:
        try:
            data = ast.literal_eval(blob)
        except (ValueError, SyntaxError):
            raise MalformedVerdict(f"unparseable judge reply: {blob[:120]!r}") from None
    if not isinstance(data, dict) or "pred" not in data or "score" not in data:
        raise MalformedVerdict(f"judge reply lacks 'pred'/'score': {blob[:120]!r}")
    pred = data["pred"]
    if not isinstance(pred, str) or pred.strip().lower() not in ("yes", "no"):
        raise MalformedVerdict(f"pred must be 'yes' or 'no', got {pred!r}")
    return JudgeVerdict(pred.strip().lower() == "yes", data["score"])


class Judge(Protocol):
    judge_id: str

    def judge(self, ground_truth: str, response: str, prompt: str) -> JudgeVerdict: ...


class OracleJudge:
    """Deterministic stand-in for the LLM judge.

    Exact token match (or both empty) is tier 3; otherwise the overlap of
    content tokens over the larger content set decides: >= 0.5 is a tier-2
    yes, any overlap a tier-1 no, none a tier-0 no.
    """

    judge_id = "oracle"

    def judge(self, ground_truth: str, response: str, prompt: str = "") -> JudgeVerdict:
        g, r = normalize_tokens(ground_truth), normalize_tokens(response)
        if g == r:
            return JudgeVerdict(True, 3)
        gc, rc = content_tokens(ground_truth), content_tokens(response)
        denom = max(len(gc), len(rc))
        overlap = len(gc & rc) / denom if denom else 0.0
        if overlap >= 0.5:
            return JudgeVerdict(True, 2)
        if overlap > 0:
            return JudgeVerdict(False, 1)
        return JudgeVerdict(False, 0)


class LLMJudge:
    """Chat-completions judge using the rubric prompt template."""

    def __init__(self, client: ChatClient, template: str | None = None, max_attempts: int = 2):
        self.client = client
        self.template = template or load_prompt_template()
        self.max_attempts = max_attempts
        self.judge_id = f"llm:{client.cfg.model}"

    def judge(self, ground_truth: str, response: str, prompt: str) -> JudgeVerdict:
        body = {
            "model": self.client.cfg.model,
            "messages": [{"role": "user", "content": fill_prompt(self.template, prompt, ground_truth, response)}],
        }
        last: MalformedVerdict | None = None
        for _ in range(self.max_attempts):
            try:
                reply = self.client.complete(body)
            except BackendError as exc:
                raise JudgeUnavailable(str(exc)) from exc
            try:
                return parse_verdict(reply)
            except MalformedVerdict as exc:
                logger.warning("malformed judge verdict: %s", exc)
                last = exc
        assert last is not None
        raise last


class CachedJudge:
    """Memoises verdicts by a digest of (ground truth, response, prompt); optionally persisted as JSON."""

    def __init__(self, inner: Judge, path: str | Path | None = None):
        self.inner = inner
        self.judge_id = inner.judge_id
        self.path = Path(path) if path else None
        self._lock = threading.Lock()
        self._cache: dict[str, JudgeVerdict] = {}
        self.hits = 0
        if self.path and self.path.is_file():
            for key, v in json.loads(self.path.read_text(encoding="utf-8")).items():
                self._cache[key] = JudgeVerdict(v["pred"] == "yes", v["score"])

    @staticmethod
    def key(judge_id: str, ground_truth: str, response: str, prompt: str) -> str:
        h = hashlib.sha256()
        for part in (judge_id, ground_truth, response, prompt):
            h.update(part.encode("utf-8"))
            h.update(b"\x00")
        return h.hexdigest()

    def judge(self, ground_truth: str, response: str, prompt: str) -> JudgeVerdict:
        k = self.key(self.judge_id, ground_truth, response, prompt)
        with self._lock:
            if k in self._cache:
                self.hits += 1
                return self._cache[k]
        verdict = self.inner.judge(ground_truth, response, prompt)
        with self._lock:
            self._cache[k] = verdict
        return verdict

    def save(self) -> None:
        if self.path is None:
            return
        with self._lock:
            data = {k: v.to_dict() for k, v in sorted(self._cache.items())}
        self.path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def judge(ground_truth: str, response: str, prompt: str, judge_backend: Judge) -> JudgeVerdict:
    return judge_backend.judge(ground_truth, response, prompt)


def make_judge(descriptor: str, api_key_env: str = "OPENAI_API_KEY", timeout: float = 120.0) -> Judge:
    """``oracle`` or ``openai:<model>@<base_url>``."""
    kind, _, arg = descriptor.partition(":")
    if kind == "oracle":
        return OracleJudge()
    if kind == "openai":
        model, at, url = arg.partition("@")
        if not (model and at and url):
            raise ConfigError(f"judge descriptor must be 'openai:<model>@<base_url>', got {descriptor!r}")
        return LLMJudge(ChatClient(RemoteConfig(url, model, api_key_env=api_key_env, timeout=timeout)))
    raise ConfigError(f"unknown judge descriptor {descriptor!r}")
