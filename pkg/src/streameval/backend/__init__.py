from .base import Backend, InferenceRequest, InferenceResult, infer
from .mock import LatencyModel, MockBackend, MockScript, Rule
from .remote import ChatClient, RemoteBackend, RemoteConfig
from .speculative import (
    ChangeDetector,
    Draft,
    ExactPayloadDetector,
    OverlapDetector,
    ScriptedDetector,
    SpeculativeBackend,
    infer_speculative,
)

__all__ = [
    "Backend", "InferenceRequest", "InferenceResult", "infer",
    "LatencyModel", "MockBackend", "MockScript", "Rule",
    "ChatClient", "RemoteBackend", "RemoteConfig",
    "ChangeDetector", "Draft", "ExactPayloadDetector", "OverlapDetector", "ScriptedDetector",
    "SpeculativeBackend", "infer_speculative",
]
