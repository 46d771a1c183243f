import json

import httpx
import pytest

from streameval.backend import InferenceRequest, RemoteBackend, RemoteConfig
from streameval.backend.remote import ChatClient, extract_text
from streameval.clock import VirtualClock, WallClock
from streameval.config import BackendSpec, RunConfig
from streameval.errors import BackendTimeout, BackendUnavailable, ConfigError, MalformedReply
from streameval.stream import Frame, StreamConfig

PNG = b"\x89PNG\r\n\x1a\n" + b"\x00" * 4


def ok(text):
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


def backend(handler, **kw):
    sleeps = []
    b = RemoteBackend(RemoteConfig("http://model.test/v1", "vlm-small", **kw), transport=httpx.MockTransport(handler),
                      sleep=sleeps.append)
    return b, sleeps


def request():
    ctx = (Frame(0, 0.0, PNG), Frame(1, 1.0, b"f1"))
    return InferenceRequest("What is happening?", ctx)


def test_request_body_snapshot(monkeypatch):
    monkeypatch.setenv("OPENAI_API_KEY", "sk-test")
    seen = []

    def handler(r: httpx.Request):
        seen.append(r)
        return ok("  chopping onions \n")

    b, _ = backend(handler, max_tokens=64)
    result = b.generate(request(), WallClock())
    assert result.text == "chopping onions"
    (r,) = seen
    assert r.url == "http://model.test/v1/chat/completions"
    assert r.headers["authorization"] == "Bearer sk-test"
    assert json.loads(r.content) == {
        "model": "vlm-small",
        "max_tokens": 64,
        "messages": [{"role": "user", "content": [
            {"type": "text", "text": "What is happening?"},
            {"type": "image_url", "image_url": {"url": "data:image/png;base64,iVBORw0KGgoAAAAA"}},
            {"type": "image_url", "image_url": {"url": "data:application/octet-stream;base64,ZjE="}},
        ]}],
    }
    assert b.build_body(request()) == b.build_body(request())


def test_retries_5xx_then_succeeds():
    calls = []

    def handler(r):
        calls.append(1)
        return httpx.Response(503, text="busy") if len(calls) < 3 else ok("fine")

    b, sleeps = backend(handler)
    assert b.generate(request(), WallClock()).text == "fine"
    assert len(calls) == 3 and sleeps == [0.5, 1.0]


def test_gives_up_after_two_retries():
    def handler(r):
        raise httpx.ConnectError("refused")

    b, sleeps = backend(handler)
    with pytest.raises(BackendUnavailable):
        b.generate(request(), WallClock())
    assert b.client.requests_sent == 3


def test_4xx_not_retried():
    b, sleeps = backend(lambda r: httpx.Response(401, text="no key"))
    with pytest.raises(BackendUnavailable):
        b.generate(request(), WallClock())
    assert sleeps == []


def test_timeout():
    def handler(r):
        raise httpx.ReadTimeout("slow")

    b, _ = backend(handler)
    with pytest.raises(BackendTimeout):
        b.generate(request(), WallClock())


def test_empty_choices():
    b, _ = backend(lambda r: httpx.Response(200, json={"choices": []}))
    with pytest.raises(MalformedReply):
        b.generate(request(), WallClock())


def test_content_parts():
    assert extract_text({"choices": [{"message": {"content": [{"type": "text", "text": "a"}, {"type": "text", "text": "b"}]}}]}) == "ab"
    with pytest.raises(MalformedReply):
        extract_text({"nope": 1})


def test_virtual_clock_rejected():
    b, _ = backend(lambda r: ok("x"))
    with pytest.raises(ConfigError):
        b.generate(request(), VirtualClock())
    for protocol in ("sync", "async"):
        with pytest.raises(ConfigError):
            RunConfig(protocol, StreamConfig(clock_mode="virtual"), backend=BackendSpec("openai:m@http://x/v1"))
    RunConfig("async", StreamConfig(clock_mode="wall"), backend=BackendSpec("openai:m@http://x/v1"))
