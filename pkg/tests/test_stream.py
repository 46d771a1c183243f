import io
import json
import threading

import pytest
from hypothesis import given, strategies as st

from streameval.clock import ClockMode, VirtualClock, WallClock, make_clock, run_virtual, Sleep, StreamSignal
from streameval.errors import ClockError, ConfigError, EmptySource, SourceNotFound
from streameval.stream import (
    CameraBuffer,
    DirectorySource,
    Frame,
    StreamConfig,
    SyntheticSource,
    drain_pending,
    open_frame_source,
    run_camera_process,
)


def frame(i):
    return Frame(i, float(i), f"f{i}".encode())


def test_directory_source(tmp_path):
    for name in ["b.png", "a.png", "e.png", "c.png", "d.png", ".hidden"]:
        (tmp_path / name).write_bytes(name.encode())
    src = DirectorySource(tmp_path)
    frames = list(src.frames())
    assert [f.timestep for f in frames] == [0, 1, 2, 3, 4]
    assert [f.payload for f in frames] == [b"a.png", b"b.png", b"c.png", b"d.png", b"e.png"]


def test_empty_and_missing_directory(tmp_path):
    with pytest.raises(EmptySource):
        DirectorySource(tmp_path)
    with pytest.raises(SourceNotFound):
        DirectorySource(tmp_path / "nope")


def test_synthetic_source():
    assert [f.payload for f in SyntheticSource(3)] == [b"f0", b"f1", b"f2"]
    assert open_frame_source("synthetic:3").count == 3
    with pytest.raises(ConfigError):
        open_frame_source("video:foo.mp4")


def test_stream_config_validation():
    with pytest.raises(ConfigError):
        StreamConfig(camera_fps=0)
    with pytest.raises(ConfigError):
        StreamConfig(camera_buffer_size=0)


def test_capacity_one_eviction():
    buf = CameraBuffer(1)
    assert buf.insert(frame(1)) is None
    evicted = buf.insert(frame(2))
    assert evicted.timestep == 1
    assert [f.timestep for f in buf.snapshot()] == [2]
    assert buf.dropped_count == 1


def test_drain():
    buf = CameraBuffer(4)
    buf.insert(frame(3))
    buf.insert(frame(4))
    assert [f.timestep for f in drain_pending(buf)] == [3, 4]
    assert buf.is_empty()
    assert drain_pending(buf) == []


@given(st.integers(1, 8), st.integers(0, 40))
def test_buffer_keeps_newest(capacity, n):
    buf = CameraBuffer(capacity)
    for i in range(n):
        buf.insert(frame(i))
        assert len(buf) <= capacity
    kept = [f.timestep for f in buf.snapshot()]
    assert kept == list(range(max(0, n - capacity), n))
    assert buf.dropped_count == max(0, n - capacity)


def test_camera_virtual_no_drop():
    buf = CameraBuffer(600)
    summary = run_camera_process(SyntheticSource(10), StreamConfig(), buf, VirtualClock())
    assert len(buf) == 10 and buf.dropped_count == 0
    assert summary.end_time == 9.0


def test_camera_virtual_drop_oldest():
    trace = io.StringIO()
    buf = CameraBuffer(2, trace=trace)
    summary = run_camera_process(SyntheticSource(10), StreamConfig(camera_buffer_size=2), buf, VirtualClock())
    assert [f.timestep for f in buf.snapshot()] == [8, 9]
    assert buf.dropped_count == 8 == summary.frames_dropped
    events = [json.loads(line) for line in trace.getvalue().splitlines()]
    assert [e["timestep"] for e in events if e["event"] == "drop"] == list(range(8))


def test_camera_wall_cadence():
    buf = CameraBuffer(10)
    summary = run_camera_process(SyntheticSource(4), StreamConfig(camera_fps=2.0, clock_mode=ClockMode.WALL), buf, WallClock())
    times = [f.capture_time for f in buf.snapshot()]
    deltas = [b - a for a, b in zip(times, times[1:])]
    assert all(abs(d - 0.5) <= 0.05 for d in deltas), deltas
    assert summary.cadence_violations == 0


def test_concurrent_insert_and_drain_linearizable():
    buf = CameraBuffer(10_000)
    n = 5000
    seen = []

    def producer():
        for i in range(n):
            buf.insert(frame(i))

    t = threading.Thread(target=producer)
    t.start()
    while t.is_alive():
        seen.extend(f.timestep for f in buf.drain())
    t.join()
    seen.extend(f.timestep for f in buf.drain())
    assert seen == list(range(n))


def test_virtual_clock():
    c = VirtualClock()
    c.advance_to(2.0)
    c.advance(0.5)
    assert c.now() == 2.5
    with pytest.raises(ClockError):
        c.advance_to(1.0)
    assert make_clock("virtual").is_virtual and not make_clock("wall").is_virtual


def test_virtual_schedule_deterministic():
    def run():
        clock, out = VirtualClock(), []

        def proc(name, times):
            for t in times:
                yield Sleep(t)
                out.append((clock.now(), name))

        run_virtual(clock, [(1, proc("b", [1, 2])), (0, proc("a", [2, 3]))], StreamSignal())
        return out

    assert run() == run() == [(1.0, "b"), (2.0, "a"), (2.0, "b"), (3.0, "a")]
