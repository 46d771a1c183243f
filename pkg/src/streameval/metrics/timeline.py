"""Per-second response timelines built from sparse response logs."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from ..core import Protocol, ResponseLog, TimedResponse


class Origin(str, enum.Enum):
    DIRECT = "direct"
    CARRIED = "carried"
    EMPTY = "empty"


@dataclass(frozen=True)
class Timeline:
    task_id: str
    texts: tuple[str, ...]
    origin: tuple[Origin, ...]

    def __len__(self) -> int:
        return len(self.texts)


def extrapolate(log: ResponseLog, n_steps: int) -> Timeline:
    """Fill every second with the latest non-pause response attributed at or before it.

    Seconds before the first such response get the empty string.  Several
    responses for the same second resolve to the last one emitted.
    """
    direct: dict[int, str] = {}
    for r in log.responses:
        if not r.is_pause and r.covered_timestep < n_steps:
            direct[r.covered_timestep] = r.text
    texts, origin = [], []
    current: str | None = None
    for i in range(n_steps):
        if i in direct:
            current = direct[i]
            origin.append(Origin.DIRECT)
        elif current is None:
            origin.append(Origin.EMPTY)
        else:
            origin.append(Origin.CARRIED)
        texts.append("" if current is None else current)
    return Timeline(log.task_id, tuple(texts), tuple(origin))


def timeline_to_log(timeline: Timeline, protocol: Protocol = Protocol.SYNC) -> ResponseLog:
    """One response per second carrying the timeline's text (for round-trip checks)."""
    responses = tuple(
        TimedResponse(emit_time=float(i), covered_timestep=i, text=t) for i, t in enumerate(timeline.texts)
    )
    return ResponseLog(timeline.task_id, protocol, responses, {})
