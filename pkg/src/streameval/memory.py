"""Model-side memory buffer and the SW / U / SW+U context-selection policies."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

from .errors import ConfigError, EmptyMemory, OrderError
from .stream import Frame


class Policy(str, enum.Enum):
    SW = "sw"
    U = "u"
    SWU = "sw+u"

    @classmethod
    def parse(cls, value: "str | Policy") -> "Policy":
        if isinstance(value, Policy):
            return value
        key = str(value).strip().lower()
        aliases = {"sw": cls.SW, "u": cls.U, "sw+u": cls.SWU, "swu": cls.SWU}
        try:
            return aliases[key]
        except KeyError:
            raise ConfigError(f"unknown memory policy {value!r} (expected sw, u or sw+u)") from None


@dataclass(frozen=True)
class MemoryConfig:
    context_size: int = 64
    policy: Policy = Policy.SW

    def __post_init__(self):
        if self.context_size < 1:
            raise ConfigError(f"context_size must be >= 1, got {self.context_size}")
        object.__setattr__(self, "policy", Policy.parse(self.policy))

    @property
    def keeps_all(self) -> bool:
        return self.policy is not Policy.SW


@dataclass
class MemoryBuffer:
    """Frames retained by the model, in capture order.

    Under SW only the newest ``k`` frames are kept; U and SW+U keep every frame
    (references to the payloads, not copies).
    """

    retained: list[Frame] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.retained)


def ingest(buffer: MemoryBuffer, frames: Sequence[Frame], cfg: MemoryConfig) -> MemoryBuffer:
    last = buffer.retained[-1].timestep if buffer.retained else -1
    for f in frames:
        if f.timestep <= last:
            raise OrderError(f"frame {f.timestep} is not newer than retained frame {last}")
        last = f.timestep
    buffer.retained.extend(frames)
    if not cfg.keeps_all and len(buffer.retained) > cfg.context_size:
        del buffer.retained[: len(buffer.retained) - cfg.context_size]
    return buffer


def uniform_indices(n: int, m: int) -> list[int]:
    """Indices of ``m`` evenly spaced picks from ``range(n)``, endpoints included.

    Pick ``j`` is ``round(j * (n - 1) / (m - 1))`` with halves rounded up,
    evaluated in integer arithmetic.  ``m == 1`` picks the newest index.
    """
    if n <= 0 or m <= 0:
        return []
    if m >= n:
        return list(range(n))
    if m == 1:
        return [n - 1]
    den = 2 * (m - 1)
    picks = [(2 * j * (n - 1) + (m - 1)) // den for j in range(m)]
    return sorted(set(picks))


def select_context_indices(n: int, cfg: MemoryConfig) -> list[int]:
    """Positions (into the retained list of length ``n``) that form the working context."""
    k = cfg.context_size
    if n <= k:
        return list(range(n))
    if cfg.policy is Policy.SW:
        return list(range(n - k, n))
    if cfg.policy is Policy.U:
        return uniform_indices(n, k)
    tail = (k + 1) // 2
    pool = n - tail
    head = uniform_indices(pool, k // 2)
    return head + list(range(pool, n))


def select_context(buffer: MemoryBuffer, cfg: MemoryConfig) -> list[Frame]:
    if not buffer.retained:
        raise EmptyMemory("cannot select a context from an empty memory buffer")
    return [buffer.retained[i] for i in select_context_indices(len(buffer.retained), cfg)]
