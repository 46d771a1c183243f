import io
import json

import pytest

from streameval.backend import InferenceResult, LatencyModel, MockBackend, MockScript, Rule
from streameval.config import BackendSpec, RunConfig
from streameval.core import AnnotationEntry, AnnotationTrack, Protocol, TaskType, dump_response_log, load_response_log
from streameval.errors import BackendUnavailable, ConfigError
from streameval.fixtures import buffer_drop_tracks, smoke_tracks
from streameval.memory import MemoryConfig, Policy
from streameval.protocol import log_path, run_async, run_suite, run_sync, second_of
from streameval.stream import StreamConfig, SyntheticSource


def track(n=10, task_id="t"):
    return AnnotationTrack(task_id, "v", TaskType.PRESENT, "c", "q?",
                           tuple(AnnotationEntry(i, f"caption {i}") for i in range(n)))


def mock(latency, n=10):
    return MockBackend(MockScript(tuple(Rule(i, i, f"caption {i}") for i in range(n)), LatencyModel("constant", c=latency)))


def async_cfg(**stream):
    return RunConfig(Protocol.ASYNC, StreamConfig(**stream))


def test_second_of():
    assert [second_of(i, 2.0) for i in range(6)] == [0, 0, 1, 1, 2, 2]
    assert [second_of(i, 1.0) for i in range(3)] == [0, 1, 2]


def test_sync_lockstep_times():
    log = run_sync(track(4), SyntheticSource(4), RunConfig(Protocol.SYNC), mock(2.5, 4))
    assert [r.covered_timestep for r in log.responses] == [0, 1, 2, 3]
    assert [r.emit_time for r in log.responses] == [2.5, 5.0, 7.5, 10.0]
    assert [r.text for r in log.responses] == [f"caption {i}" for i in range(4)]


def test_sync_fast_model_follows_stream():
    log = run_sync(track(3), SyntheticSource(3), RunConfig(Protocol.SYNC), mock(0.25, 3))
    assert [r.emit_time for r in log.responses] == [0.25, 1.25, 2.25]


def test_sync_two_fps_one_response_per_second():
    cfg = RunConfig(Protocol.SYNC, StreamConfig(camera_fps=2.0))
    seen = []

    class Spy(MockBackend):
        def generate(self, req, clock):
            seen.append([f.timestep for f in req.context])
            return super().generate(req, clock)

    log = run_sync(track(3), SyntheticSource(6), cfg, Spy(mock(0).script))
    assert [r.covered_timestep for r in log.responses] == [0, 1, 2]
    assert seen[-1] == [0, 1, 2, 3, 4, 5]


def test_async_zero_latency_answers_every_second():
    log = run_async(track(), SyntheticSource(10), async_cfg(), mock(0))
    assert [r.covered_timestep for r in log.responses] == list(range(10))
    assert log.run_metadata["frames_dropped"] == 0


def test_async_slow_model_sees_fewer_frames():
    trace = []
    log = run_async(track(), SyntheticSource(10), async_cfg(), mock(2.5), trace=trace)
    assert [r.emit_time for r in log.responses] == [2.5, 5.0, 7.5, 10.0]
    assert trace[0].drains == [[0], [1, 2], [3, 4], [5, 6, 7]]


def test_async_buffer_drop_trace():
    events = io.StringIO()
    trace = []
    log = run_async(buffer_drop_tracks()[0], SyntheticSource(10), async_cfg(camera_buffer_size=2), mock(5.0),
                    trace=trace, buffer_trace=events)
    assert trace[0].drains == [[0], [3, 4]]
    lines = [json.loads(x) for x in events.getvalue().splitlines()]
    assert [e["timestep"] for e in lines if e["event"] == "drop" and e["t"] <= 5.0] == [1, 2]
    assert log.run_metadata["frames_dropped"] == 5


def test_async_sliding_window_context():
    seen = []

    class Spy(MockBackend):
        def generate(self, req, clock):
            seen.append([f.timestep for f in req.context])
            return super().generate(req, clock)

    cfg = RunConfig(Protocol.ASYNC, memory=MemoryConfig(2, Policy.SW))
    run_async(track(), SyntheticSource(10), cfg, Spy(mock(2.5).script))
    assert seen == [[0], [1, 2], [3, 4], [6, 7]]


def test_async_backend_failure_marks_incomplete():
    class Flaky(MockBackend):
        def generate(self, req, clock):
            if req.covered_timestep >= 3:
                raise BackendUnavailable("down")
            return super().generate(req, clock)

    log = run_async(track(), SyntheticSource(10), async_cfg(), Flaky(mock(1.0).script))
    assert log.incomplete
    assert "BackendUnavailable" in log.run_metadata["error"]
    assert [r.covered_timestep for r in log.responses] == [0, 1, 2]


def test_sync_backend_failure_marks_incomplete():
    class Down(MockBackend):
        def generate(self, req, clock):
            raise BackendUnavailable("down")

    log = run_sync(track(3), SyntheticSource(3), RunConfig(Protocol.SYNC), Down(mock(0).script))
    assert log.incomplete and log.responses == ()


def test_async_pause_is_logged():
    script = MockScript((Rule(0, 9, "same"),), LatencyModel("constant", c=1.0), frozenset({4}))
    log = run_async(track(), SyntheticSource(10), async_cfg(), MockBackend(script))
    pauses = [r for r in log.responses if r.is_pause]
    assert len(pauses) == 1 and pauses[0].covered_timestep == 4 and pauses[0].latency == 1.0


def test_short_source_is_tolerated():
    log = run_async(track(10), SyntheticSource(4), async_cfg(), mock(0))
    assert [r.covered_timestep for r in log.responses] == [0, 1, 2, 3]


def test_run_suite_writes_sorted_logs(tmp_path):
    tracks = smoke_tracks()
    cfg = RunConfig(Protocol.ASYNC)
    logs = run_suite(list(reversed(tracks)), {"kitchen": lambda: SyntheticSource(10)}, cfg, out_dir=tmp_path,
                     extra_metadata={"manifest_digest": "abc"})
    assert [l.task_id for l in logs] == sorted(t.task_id for t in tracks)
    for l in logs:
        again = load_response_log(log_path(tmp_path, l.task_id).read_bytes())
        assert again == l and again.run_metadata["manifest_digest"] == "abc"


def test_run_suite_missing_source():
    with pytest.raises(ConfigError, match="kitchen"):
        run_suite(smoke_tracks(), {}, RunConfig())


def test_run_suite_isolates_failures(tmp_path):
    def broken():
        raise BackendUnavailable("no source")

    tracks = [track(3, "a"), AnnotationTrack("b", "w", TaskType.PRESENT, "c", "q?", (AnnotationEntry(0, "x"),))]
    logs = run_suite(tracks, {"v": lambda: SyntheticSource(3), "w": broken}, RunConfig())
    assert [l.incomplete for l in logs] == [False, True]


def test_virtual_runs_byte_identical():
    dumps = {dump_response_log(run_async(track(), SyntheticSource(10), async_cfg(), mock(2.5))) for _ in range(5)}
    assert len(dumps) == 1


def test_remote_virtual_rejected():
    with pytest.raises(ConfigError):
        RunConfig(Protocol.ASYNC, backend=BackendSpec("openai:m@http://localhost:1/v1"))
