"""Exception hierarchy shared across the harness."""

from __future__ import annotations


class HarnessError(Exception):
    """Base class for every error raised by streameval."""


class ParseError(HarnessError):
    """Input document is not valid JSON or not the expected top-level shape."""


class SchemaError(HarnessError):
    """Document parsed but violates a schema invariant."""

    def __init__(self, message: str, *, track_id: str | None = None, field: str | None = None):
        self.track_id = track_id
        self.field = field
        prefix = []
        if track_id is not None:
            prefix.append(f"track {track_id!r}")
        if field is not None:
            prefix.append(f"field {field!r}")
        super().__init__(f"{', '.join(prefix)}: {message}" if prefix else message)


class ConfigError(HarnessError):
    """Invalid run configuration or manifest."""


class SourceNotFound(HarnessError):
    pass


class EmptySource(HarnessError):
    pass


class ClockError(HarnessError):
    """Clock went backwards or was misused."""


class OrderError(HarnessError):
    """Frames ingested out of capture order."""


class EmptyMemory(HarnessError):
    pass


class BackendError(HarnessError):
    pass


class BackendUnavailable(BackendError):
    pass


class BackendTimeout(BackendError):
    pass


class MalformedReply(BackendError):
    pass


class JudgeUnavailable(HarnessError):
    pass


class MalformedVerdict(HarnessError):
    pass


class DegenerateTrack(HarnessError):
    """Track too short for the requested metric."""


class MissingMetadata(HarnessError):
    pass


class MissingLog(HarnessError):
    def __init__(self, task_ids: list[str]):
        self.task_ids = sorted(task_ids)
        super().__init__(f"no response log for task(s): {', '.join(self.task_ids)}")
