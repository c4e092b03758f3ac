"""daqsynth: conversational top-down synthesis of data acquisition systems.

A designer model is driven through four stages (architecture, categorisation,
per-block detailing, revision) against a client port that can be a human, the
HTTP API bridge, or an automated user emulation; the batch harness reruns the
four-project testbench corpus and persists per-iteration artifacts.
"""

from .artifacts import Metrics, RunArtifact, collect_metrics, run_session
from .conversation import Conversation
from .diagram import BlockGraph, DotSource, extract_dot, parse, to_dot, validate
from .emulation import (
    EmulationMode,
    RequirementList,
    compose_direct_description,
    direct_port,
    open_port,
)
from .errors import DaqSynthError
from .events import EventLog
from .flow import (
    ChatClient,
    ClientPort,
    FeedbackVerdict,
    SessionConfigs,
    SessionState,
    Stage,
    VerdictRequest,
    parse_questions,
    start_session,
)
from .gateway import (
    Backend,
    ChatMessage,
    ChatResponse,
    LiveBackend,
    ModelConfig,
    ScriptedBackend,
    complete,
    load_script,
    record_wrap,
)
from .prompts import CategoryId, PromptCatalog, default_catalog
from .store import SessionStore
from .testbench import RunConfig, Testbench, load_corpus, run_batch

__version__ = "0.1.0"

__all__ = [
    "Backend",
    "BlockGraph",
    "CategoryId",
    "ChatClient",
    "ChatMessage",
    "ChatResponse",
    "ClientPort",
    "Conversation",
    "DaqSynthError",
    "DotSource",
    "EmulationMode",
    "EventLog",
    "FeedbackVerdict",
    "LiveBackend",
    "Metrics",
    "ModelConfig",
    "PromptCatalog",
    "RequirementList",
    "RunArtifact",
    "RunConfig",
    "ScriptedBackend",
    "SessionConfigs",
    "SessionState",
    "SessionStore",
    "Stage",
    "Testbench",
    "VerdictRequest",
    "collect_metrics",
    "complete",
    "compose_direct_description",
    "default_catalog",
    "direct_port",
    "extract_dot",
    "load_corpus",
    "load_script",
    "open_port",
    "parse",
    "parse_questions",
    "record_wrap",
    "run_batch",
    "run_session",
    "start_session",
    "to_dot",
    "validate",
]
