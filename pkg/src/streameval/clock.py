"""Clocks and the two process drivers (virtual event loop, wall-clock threads).

Camera and model loops are written once as generators that yield scheduling
commands (:class:`Sleep`, :class:`WaitFrame`).  :func:`run_virtual` interprets
them as a deterministic discrete-event simulation; :func:`run_wall` gives each
process its own thread and honours the commands in real time.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import threading
import time
from dataclasses import dataclass
from typing import Callable, Generator, Iterable, Union

from .errors import ClockError


class ClockMode(str, enum.Enum):
    WALL = "wall"
    VIRTUAL = "virtual"


class Clock:
    mode: ClockMode

    def now(self) -> float:
        raise NotImplementedError

    @property
    def is_virtual(self) -> bool:
        return self.mode is ClockMode.VIRTUAL


class VirtualClock(Clock):
    """Time moves only through :meth:`advance_to`; a single writer is assumed."""

    mode = ClockMode.VIRTUAL

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def advance_to(self, t: float) -> None:
        if t < self._now:
            raise ClockError(f"virtual clock cannot go back from {self._now} to {t}")
        self._now = float(t)

    def advance(self, dt: float) -> None:
        if dt < 0:
            raise ClockError(f"negative advance {dt}")
        self._now += dt


class WallClock(Clock):
    """Seconds since construction, read from ``time.perf_counter``."""

    mode = ClockMode.WALL

    def __init__(self):
        self._origin = time.perf_counter()
        self._last = 0.0
        self._lock = threading.Lock()

    def now(self) -> float:
        t = time.perf_counter() - self._origin
        with self._lock:
            if t < self._last:
                raise ClockError(f"wall clock went backwards ({self._last} -> {t})")
            self._last = t
        return t

    def sleep_until(self, t: float) -> None:
        while True:
            remaining = t - self.now()
            if remaining <= 0:
                return
            time.sleep(remaining)


def make_clock(mode: ClockMode | str) -> Clock:
    return VirtualClock() if ClockMode(mode) is ClockMode.VIRTUAL else WallClock()


@dataclass(frozen=True)
class Sleep:
    """Resume no earlier than absolute time ``until``."""

    until: float


@dataclass(frozen=True)
class WaitFrame:
    """Resume once the watched buffer is non-empty or the stream has ended."""


Command = Union[Sleep, WaitFrame]
Process = Generator[Command, None, None]


class StreamSignal:
    """End-of-stream flag plus wake-ups for a process blocked in WaitFrame.

    The camera buffer calls :meth:`notify` on every insert.
    """

    def __init__(self):
        self._cond = threading.Condition()
        self._ended = False
        self._listeners: list[Callable[[], None]] = []

    @property
    def ended(self) -> bool:
        return self._ended

    def end(self) -> None:
        with self._cond:
            self._ended = True
            self._cond.notify_all()
        for fn in list(self._listeners):
            fn()

    def notify(self) -> None:
        with self._cond:
            self._cond.notify_all()
        for fn in list(self._listeners):
            fn()

    def wait(self, ready: Callable[[], bool], timeout: float | None = None) -> None:
        with self._cond:
            self._cond.wait_for(lambda: ready() or self._ended, timeout=timeout)

    def add_listener(self, fn: Callable[[], None]) -> None:
        self._listeners.append(fn)

    def remove_listener(self, fn: Callable[[], None]) -> None:
        self._listeners.remove(fn)


def run_virtual(
    clock: VirtualClock,
    processes: Iterable[tuple[int, Process]],
    signal: StreamSignal,
    ready: Callable[[], bool] = lambda: False,
) -> None:
    """Drive generator processes on a virtual clock until all finish.

    ``processes`` are ``(priority, generator)`` pairs.  Events at the same instant
    run in ascending priority, then FIFO, so the schedule is fully determined
    by its inputs.  A process blocked in WaitFrame is rescheduled at the
    current instant whenever ``signal`` fires and ``ready()`` holds (or the
    stream has ended).
    """
    seq = itertools.count()
    heap: list[tuple[float, int, int, Process]] = []
    waiting: list[tuple[int, Process]] = []

    def schedule(t: float, prio: int, proc: Process) -> None:
        heapq.heappush(heap, (t, prio, next(seq), proc))

    def wake_waiters() -> None:
        if not waiting or not (ready() or signal.ended):
            return
        for prio, proc in waiting:
            schedule(clock.now(), prio, proc)
        waiting.clear()

    signal.add_listener(wake_waiters)
    try:
        for prio, proc in processes:
            schedule(clock.now(), prio, proc)
        while heap:
            t, prio, _, proc = heapq.heappop(heap)
            clock.advance_to(t)
            try:
                cmd = next(proc)
            except StopIteration:
                continue
            if isinstance(cmd, Sleep):
                schedule(max(cmd.until, clock.now()), prio, proc)
            elif isinstance(cmd, WaitFrame):
                if ready() or signal.ended:
                    schedule(clock.now(), prio, proc)
                else:
                    waiting.append((prio, proc))
            else:
                raise TypeError(f"unknown scheduling command {cmd!r}")
        if waiting:
            raise ClockError("virtual run deadlocked: processes still waiting with no pending events")
    finally:
        signal.remove_listener(wake_waiters)


def run_wall(
    clock: WallClock,
    processes: Iterable[tuple[int, Process]],
    signal: StreamSignal,
    ready: Callable[[], bool] = lambda: False,
) -> None:
    """Run each generator process on its own thread against the wall clock.

    The first exception raised by any process is re-raised after all threads
    stop; on error the stream is ended so that waiting processes unblock.
    """
    errors: list[BaseException] = []

    def drive(proc: Process) -> None:
        try:
            for cmd in proc:
                if isinstance(cmd, Sleep):
                    clock.sleep_until(cmd.until)
                elif isinstance(cmd, WaitFrame):
                    signal.wait(ready)
                else:
                    raise TypeError(f"unknown scheduling command {cmd!r}")
        except BaseException as exc:  # noqa: BLE001 - re-raised in the caller's thread
            errors.append(exc)
            signal.end()

    threads = [
        threading.Thread(target=drive, args=(proc,), name=f"streameval-proc-{prio}", daemon=True)
        for prio, proc in processes
    ]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    if errors:
        raise errors[0]
