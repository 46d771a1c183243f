import time

import pytest
from hypothesis import given, strategies as st

from streameval.backend import (
    Draft,
    ExactPayloadDetector,
    InferenceRequest,
    InferenceResult,
    LatencyModel,
    MockBackend,
    MockScript,
    OverlapDetector,
    Rule,
    ScriptedDetector,
    SpeculativeBackend,
    infer,
    infer_speculative,
)
from streameval.clock import VirtualClock, WallClock
from streameval.errors import BackendTimeout, ConfigError
from streameval.stream import Frame


def req(*ts, payload=None):
    ctx = tuple(Frame(t, float(t), payload or f"f{t}".encode()) for t in ts)
    return InferenceRequest("What now?", ctx)


def test_mock_rule():
    mock = MockBackend(MockScript((Rule(0, 4, "stirring the pot"),), LatencyModel("constant", c=1.5)))
    r = mock.generate(req(2), VirtualClock())
    assert (r.text, r.latency, r.is_pause) == ("stirring the pot", 1.5, False)


def test_mock_pause():
    mock = MockBackend(MockScript((Rule(0, 4, "x"),), LatencyModel("constant", c=0.7), frozenset({3})))
    r = mock.generate(req(3), VirtualClock())
    assert r.is_pause and r.text == "" and r.latency == 0.7


def test_linear_latency_and_rule_override():
    script = MockScript((Rule(0, 1, "a"), Rule(2, 3, "b", latency=9.0)), LatencyModel("linear", a=1.0, b=0.5))
    mock = MockBackend(script)
    assert mock.generate(req(0, 1), VirtualClock()).latency == 2.0
    assert mock.generate(req(3), VirtualClock()).latency == 9.0


def test_script_validation():
    with pytest.raises(ConfigError):
        MockScript((Rule(0, 4, "a"), Rule(3, 6, "b")))
    with pytest.raises(ConfigError):
        LatencyModel("constant", c=-1)


def test_script_dict_round_trip():
    script = MockScript((Rule(0, 4, "a"), Rule(5, 9, "b", latency=2.0)), LatencyModel("linear", a=0.1, b=0.2), frozenset({7}))
    assert MockScript.from_dict(script.to_dict()) == script
    assert script.change_steps() == {5, 10}  # 10: script runs out


@given(st.lists(st.integers(0, 9), min_size=1, max_size=20))
def test_mock_determinism(steps):
    script = MockScript((Rule(0, 4, "a"), Rule(5, 9, "b")), LatencyModel("constant", c=1.0), frozenset({6}))

    def run():
        m = MockBackend(script)
        return [m.generate(req(t), VirtualClock()) for t in steps]

    assert run() == run()


def test_mock_wall_clock_sleeps():
    mock = MockBackend(MockScript((Rule(0, 0, "a"),), LatencyModel("constant", c=0.2)))
    t0 = time.perf_counter()
    r = infer(mock, req(0), WallClock())
    assert time.perf_counter() - t0 >= 0.19
    assert abs(r.latency - 0.2) < 0.05


def test_infer_timeout():
    mock = MockBackend(MockScript((Rule(0, 0, "a"),), LatencyModel("constant", c=3.0)))
    with pytest.raises(BackendTimeout):
        infer(mock, req(0), VirtualClock(), timeout=1.0)


def test_result_invariants():
    with pytest.raises(Exception):
        InferenceResult("text", is_pause=True)
    with pytest.raises(Exception):
        InferenceResult("text", latency=-1)
    with pytest.raises(Exception):
        InferenceRequest("q", ())


def make_wrapper(detector, verify_cost=0.2, gen_latency=5.0):
    inner = MockBackend(MockScript((Rule(0, 9, "STOP sign ahead"),), LatencyModel("constant", c=gen_latency)))
    return inner, SpeculativeBackend(inner, detector, verify_cost)


def test_speculative_accept_path():
    inner, wrapper = make_wrapper(ScriptedDetector())
    prior = Draft(req(1), InferenceResult("STOP sign ahead", latency=5.0))
    result, accepted = infer_speculative(wrapper, req(2), prior, VirtualClock())
    assert accepted and result.text == "STOP sign ahead" and result.latency == 0.2
    assert inner.generate_calls == 0


def test_speculative_cold_start():
    inner, wrapper = make_wrapper(ScriptedDetector())
    result, accepted = infer_speculative(wrapper, req(0), None, VirtualClock())
    assert not accepted and inner.generate_calls == 1 and result.latency == 5.0


def test_exact_payload_change_regenerates_once():
    inner, wrapper = make_wrapper(ExactPayloadDetector())
    prior = Draft(req(1, payload=b"A"), InferenceResult("STOP sign ahead", latency=5.0))
    result, accepted = infer_speculative(wrapper, req(2, payload=b"B"), prior, VirtualClock())
    assert not accepted and inner.generate_calls == 1


def test_scripted_detector_window():
    d = ScriptedDetector({5})
    assert d.accepts(req(3), req(4))
    assert not d.accepts(req(4), req(5))
    assert not d.accepts(req(2), req(7))
    assert d.accepts(req(5), req(7))


def test_overlap_detector():
    assert OverlapDetector.overlap(b"abcd", b"abxd") == 0.75
    assert OverlapDetector(0.7).accepts(req(0, payload=b"abcd"), req(1, payload=b"abxd"))
    assert not OverlapDetector(0.8).accepts(req(0, payload=b"abcd"), req(1, payload=b"abxd"))
    with pytest.raises(ConfigError):
        OverlapDetector(1.5)


@given(st.lists(st.booleans(), min_size=1, max_size=30))
def test_speculative_never_generates_on_accept(changes):
    change_steps = {i + 1 for i, c in enumerate(changes) if c}
    inner, wrapper = make_wrapper(ScriptedDetector(change_steps), verify_cost=0.2, gen_latency=5.0)
    clock = VirtualClock()
    for t in range(len(changes) + 1):
        before = inner.generate_calls
        r = wrapper.generate(req(t), clock)
        if inner.generate_calls == before:
            assert r.latency <= inner.script.latency.minimum
    assert inner.generate_calls == 1 + len(change_steps)
    assert wrapper.accepts + wrapper.rejects == len(changes) + 1


def test_speculative_needs_verify_cost():
    class NoVerify:
        backend_id, is_remote = "nv", False

        def generate(self, r, c):
            return InferenceResult("x")

    with pytest.raises(ConfigError):
        SpeculativeBackend(NoVerify(), ScriptedDetector())
