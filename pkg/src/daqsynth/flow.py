"""Four-stage session state machine.

A session moves strictly forward through Architectural, Categorisation,
Detailing (once per block) and Revision. The architectural and detailing
stages run one question round and an unbounded feedback loop against a client
port, which may be a human at a terminal, the HTTP API bridge, or one of the
automated user emulations.
"""

from __future__ import annotations

import enum
import re
import uuid
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from . import events as ev
from .conversation import Conversation
from .diagram import (
    BlockGraph,
    DotSource,
    extract_dot,
    parse,
    topological_order,
)
from .errors import (
    DaqSynthError,
    DotParseError,
    ExtractionError,
    StageError,
    StateError,
    UsageError,
)
from .events import EventLog
from .gateway import Backend, ChatMessage, ChatResponse, ModelConfig, complete
from .prompts import CategoryId, PromptCatalog, default_catalog

MAX_QUESTIONS = 5
MAX_CONSECUTIVE_BAD_DIAGRAMS = 3

_DIGRAPH_RE = re.compile(r"\bdigraph\b")
_LISTED_LINE_RE = re.compile(r"^\s*(?:\d{1,3}[.)]\s*|[-*•]\s+)(\S.*?)\s*$")


class Stage(enum.Enum):
    ARCHITECTURAL = "Architectural"
    CATEGORISATION = "Categorisation"
    DETAILING = "Detailing"
    REVISION = "Revision"
    DONE = "Done"


_STAGE_ORDER = list(Stage)


@dataclass(frozen=True)
class FeedbackVerdict:
    kind: str  # "accept" | "revise"
    feedback_text: str = ""

    def __post_init__(self):
        if self.kind not in ("accept", "revise"):
            raise UsageError(f"unknown verdict kind {self.kind!r}")
        if self.kind == "revise" and not self.feedback_text.strip():
            raise UsageError("revise verdict requires nonempty feedback text")
        if self.kind == "accept" and self.feedback_text:
            raise UsageError("accept verdict carries no feedback text")

    @property
    def accepted(self) -> bool:
        return self.kind == "accept"


def accept() -> FeedbackVerdict:
    return FeedbackVerdict("accept")


def revise(feedback_text: str) -> FeedbackVerdict:
    return FeedbackVerdict("revise", feedback_text)


@dataclass(frozen=True)
class VerdictRequest:
    """What a client port is asked to judge."""

    kind: str  # "architecture" | "detail" | "summary"
    content: str
    block: str | None = None
    graph: BlockGraph | None = None


class ClientPort(Protocol):
    def answer_questions(self, questions: list[str]) -> list[str]: ...

    def give_verdict(self, request: VerdictRequest) -> FeedbackVerdict: ...


@dataclass(frozen=True)
class BlockTask:
    node_id: str
    label: str
    category: CategoryId


@dataclass(frozen=True)
class SessionConfigs:
    designer: ModelConfig
    emulator: ModelConfig | None = None


@dataclass
class SessionState:
    id: str
    description: str
    stage: Stage = Stage.ARCHITECTURAL
    conversation: Conversation = field(default_factory=Conversation)
    architecture: BlockGraph | None = None
    architecture_dot: str | None = None
    block_queue: list[BlockTask] = field(default_factory=list)
    details: dict[str, str] = field(default_factory=dict)
    failed_blocks: dict[str, str] = field(default_factory=dict)
    summary: str | None = None
    failed: bool = False
    failure_reason: str | None = None

    def pending_blocks(self) -> list[BlockTask]:
        return [
            task
            for task in self.block_queue
            if task.node_id not in self.details and task.node_id not in self.failed_blocks
        ]


@dataclass
class ChatClient:
    """Binds a model config, a backend and the transcript log under one actor tag."""

    config: ModelConfig
    backend: Backend
    log: EventLog
    actor: str  # "designer" | "emulator"

    def chat(self, messages: Sequence[ChatMessage]) -> ChatResponse:
        try:
            response = complete(self.config, messages, self.backend)
        except DaqSynthError as exc:
            self.log.emit(
                {
                    "event": ev.EV_LLM_ERROR,
                    "actor": self.actor,
                    "model": self.config.model_name,
                    "error": str(exc),
                }
            )
            raise
        self.log.emit(
            {
                "event": ev.EV_LLM_CALL,
                "actor": self.actor,
                "model": self.config.model_name,
                "temperature": self.config.temperature,
                "messages": [{"role": m.role, "content": m.content} for m in messages],
                "response": {
                    "content": response.content,
                    "finish_reason": response.finish_reason,
                    "prompt_tokens": response.usage.prompt_tokens,
                    "completion_tokens": response.usage.completion_tokens,
                    "usage_missing": response.usage_missing,
                },
            }
        )
        return response


def parse_questions(model_output: str) -> list[str]:
    """Extract the designer's question list, capped at five entries.

    Numbered or bulleted lines ending in a question mark win; the trailing-?
    requirement keeps bulleted specification content from being mistaken for
    questions. Failing those, a whole text that ends with a question mark is a
    single question; anything else is no question at all.
    """
    questions = [
        m.group(1)
        for line in model_output.splitlines()
        if (m := _LISTED_LINE_RE.match(line)) and m.group(1).endswith("?")
    ]
    if questions:
        return questions[:MAX_QUESTIONS]
    text = model_output.strip()
    if text.endswith("?"):
        return [text]
    return []


def new_session_id() -> str:
    return uuid.uuid4().hex


def start_session(
    description: str,
    configs: SessionConfigs,
    *,
    catalog: PromptCatalog | None = None,
    log: EventLog | None = None,
    session_id: str | None = None,
) -> SessionState:
    """Seed a session: persona plus the architecture request."""
    if not description.strip():
        raise UsageError("project description must be nonempty")
    catalog = catalog or default_catalog()
    log = log or EventLog()
    state = SessionState(id=session_id or new_session_id(), description=description)
    started = {
        "event": ev.EV_SESSION_STARTED,
        "id": state.id,
        "description": description,
        "designer": {
            "model": configs.designer.model_name,
            "temperature": configs.designer.temperature,
        },
    }
    if configs.emulator is not None:
        started["emulator"] = {
            "model": configs.emulator.model_name,
            "temperature": configs.emulator.temperature,
        }
    log.emit(started)
    for message in catalog.architecture_prompt(description):
        _append(state, log, message)
    return state


def _append(state: SessionState, log: EventLog, message: ChatMessage) -> None:
    state.conversation.append(message)
    log.emit({"event": ev.EV_MESSAGE_APPENDED, "role": message.role, "content": message.content})


def _advance(state: SessionState, log: EventLog, new_stage: Stage) -> None:
    current = _STAGE_ORDER.index(state.stage)
    target = _STAGE_ORDER.index(new_stage)
    if target != current + 1:
        raise StateError(f"illegal stage transition {state.stage.value} -> {new_stage.value}")
    state.stage = new_stage
    log.emit({"event": ev.EV_STAGE_ADVANCED, "stage": new_stage.value})


def _fail(state: SessionState, log: EventLog, reason: str) -> None:
    if state.failed:
        return
    state.failed = True
    state.failure_reason = reason
    log.emit({"event": ev.EV_SESSION_FAILED, "reason": reason})


def _run_question_round(
    state: SessionState,
    conversation: Conversation,
    port: ClientPort,
    designer: ChatClient,
    catalog: PromptCatalog,
    log: EventLog,
    *,
    stage: str,
    block: str | None,
    response: ChatResponse,
) -> ChatResponse:
    """One question/answer exchange; returns the response that follows it (or
    the original response when the model asked nothing)."""
    questions = parse_questions(response.content)
    if not questions:
        return response
    event: dict = {"event": ev.EV_QUESTIONS_ASKED, "stage": stage, "questions": questions}
    if block is not None:
        event["block"] = block
    log.emit(event)
    answers = port.answer_questions(questions)
    if len(answers) != len(questions):
        raise UsageError(
            f"client port returned {len(answers)} answers for {len(questions)} questions"
        )
    event = {"event": ev.EV_ANSWERS_GIVEN, "stage": stage, "answers": answers}
    if block is not None:
        event["block"] = block
    log.emit(event)
    reply = ChatMessage("user", catalog.answers_message(answers, stage))
    if conversation is state.conversation:
        _append(state, log, reply)
    else:
        conversation.append(reply)
    response = designer.chat(conversation.messages)
    if conversation is state.conversation:
        _append(state, log, ChatMessage("assistant", response.content))
    else:
        conversation.append(ChatMessage("assistant", response.content))
    return response


def architectural_stage(
    state: SessionState,
    port: ClientPort,
    designer: ChatClient,
    catalog: PromptCatalog | None = None,
) -> None:
    """Question round, diagram generation with bounded self-repair, feedback
    loop, then pruning of the rejected attempts."""
    if state.stage is not Stage.ARCHITECTURAL:
        raise StateError(f"architectural stage requires Architectural, got {state.stage.value}")
    catalog = catalog or default_catalog()
    log = designer.log

    response = designer.chat(state.conversation.messages)
    _append(state, log, ChatMessage("assistant", response.content))

    if not _DIGRAPH_RE.search(response.content):
        after_questions = _run_question_round(
            state,
            state.conversation,
            port,
            designer,
            catalog,
            log,
            stage="architectural",
            block=None,
            response=response,
        )
        if after_questions is response:
            # no questions and no diagram yet: nudge once
            _append(state, log, ChatMessage("user", catalog.get("nudge_architecture").body))
            response = designer.chat(state.conversation.messages)
            _append(state, log, ChatMessage("assistant", response.content))
        else:
            response = after_questions

    consecutive_bad = 0
    while True:
        try:
            dot = extract_dot(response.content)
            graph = parse(dot)
        except (ExtractionError, DotParseError) as exc:
            consecutive_bad += 1
            if consecutive_bad >= MAX_CONSECUTIVE_BAD_DIAGRAMS:
                reason = f"architecture generation failed after {consecutive_bad} attempts: {exc}"
                _fail(state, log, reason)
                raise StageError(reason) from exc
            log.emit({"event": ev.EV_DIAGRAM_RETRY, "error": str(exc)})
            _append(state, log, ChatMessage("user", catalog.regenerate_message(str(exc))))
            response = designer.chat(state.conversation.messages)
            _append(state, log, ChatMessage("assistant", response.content))
            continue
        consecutive_bad = 0

        verdict = port.give_verdict(
            VerdictRequest("architecture", dot.text, graph=graph)
        )
        log.emit(
            {
                "event": ev.EV_VERDICT_GIVEN,
                "subject": "architecture",
                "kind": verdict.kind,
                "text": verdict.feedback_text,
            }
        )
        if verdict.accepted:
            state.conversation.prune_architecture_loop(dot.text)
            state.architecture = graph
            state.architecture_dot = dot.text
            log.emit({"event": ev.EV_ARCHITECTURE_ACCEPTED, "dot": dot.text})
            _advance(state, log, Stage.CATEGORISATION)
            return
        _append(state, log, ChatMessage("user", catalog.feedback_message(verdict.feedback_text)))
        response = designer.chat(state.conversation.messages)
        _append(state, log, ChatMessage("assistant", response.content))


def categorisation_stage(
    state: SessionState,
    designer: ChatClient,
    catalog: PromptCatalog | None = None,
) -> None:
    """One internal model call that maps every block onto the nine categories.

    No client port is involved. Blocks the reply misses (or labels with an
    unknown category) fall back to Others and are flagged for metrics.
    """
    if state.stage is not Stage.CATEGORISATION:
        raise StateError(f"categorisation stage requires Categorisation, got {state.stage.value}")
    if state.architecture is None:
        raise StateError("categorisation requires an accepted architecture")
    catalog = catalog or default_catalog()
    log = designer.log
    graph = state.architecture

    names = [node.label for node in graph.nodes]
    fork = state.conversation.fork_for_detailing()
    fork.append(ChatMessage("user", catalog.categorisation_prompt(names)))
    response = designer.chat(fork.messages)

    assigned: dict[str, CategoryId] = {}
    for line in response.content.splitlines():
        if ":" not in line:
            continue
        name, _, category_text = line.rpartition(":")
        name = re.sub(r"^\s*(?:\d{1,3}[.)]|[-*•])\s*", "", name).strip()
        category = CategoryId.parse(category_text)
        if name and category is not None:
            assigned[name.casefold()] = category

    queue: list[BlockTask] = []
    fallback: list[str] = []
    for node_id in topological_order(graph):
        node = graph.get(node_id)
        category = assigned.get(node.label.casefold()) or assigned.get(node.id.casefold())
        if category is None:
            category = CategoryId.OTHERS
            fallback.append(node_id)
        queue.append(BlockTask(node_id, node.label, category))
    state.block_queue = queue
    log.emit(
        {
            "event": ev.EV_BLOCK_QUEUE_SET,
            "blocks": [
                {"id": task.node_id, "label": task.label, "category": task.category.value}
                for task in queue
            ],
            "fallback": fallback,
        }
    )
    _advance(state, log, Stage.DETAILING)


def detailing_stage(
    state: SessionState,
    block: BlockTask,
    port: ClientPort,
    designer: ChatClient,
    catalog: PromptCatalog | None = None,
    *,
    continue_on_failure: bool = True,
) -> None:
    """Detail one block on a fresh fork of the architectural conversation.

    The fork is discarded afterwards, so no other block ever sees this
    block's exchange. Advances to Revision once every queued block is done.
    """
    if state.stage is not Stage.DETAILING:
        raise StateError(f"detailing stage requires Detailing, got {state.stage.value}")
    if block.node_id in state.details or block.node_id in state.failed_blocks:
        raise StateError(f"block {block.node_id!r} already processed")
    if all(task.node_id != block.node_id for task in state.block_queue):
        raise StateError(f"block {block.node_id!r} is not in the queue")
    catalog = catalog or default_catalog()
    log = designer.log

    log.emit(
        {
            "event": ev.EV_DETAIL_STARTED,
            "block": block.node_id,
            "label": block.label,
            "category": block.category.value,
        }
    )
    fork = state.conversation.fork_for_detailing()
    fork.append(ChatMessage("user", catalog.category_prompt(block.category, block.label)))
    try:
        response = designer.chat(fork.messages)
        fork.append(ChatMessage("assistant", response.content))
        response = _run_question_round(
            state,
            fork,
            port,
            designer,
            catalog,
            log,
            stage="detailing",
            block=block.node_id,
            response=response,
        )
        while True:
            verdict = port.give_verdict(
                VerdictRequest("detail", response.content, block=block.node_id)
            )
            log.emit(
                {
                    "event": ev.EV_VERDICT_GIVEN,
                    "subject": "detail",
                    "block": block.node_id,
                    "kind": verdict.kind,
                    "text": verdict.feedback_text,
                }
            )
            if verdict.accepted:
                state.details[block.node_id] = response.content
                log.emit(
                    {
                        "event": ev.EV_DETAIL_STORED,
                        "block": block.node_id,
                        "text": response.content,
                    }
                )
                break
            fork.append(ChatMessage("user", catalog.feedback_message(verdict.feedback_text)))
            response = designer.chat(fork.messages)
            fork.append(ChatMessage("assistant", response.content))
    except DaqSynthError as exc:
        if not continue_on_failure:
            raise
        state.failed_blocks[block.node_id] = str(exc)
        log.emit({"event": ev.EV_BLOCK_FAILED, "block": block.node_id, "reason": str(exc)})

    if not state.pending_blocks():
        _advance(state, log, Stage.REVISION)


def revision_stage(
    state: SessionState,
    port: ClientPort,
    designer: ChatClient,
    catalog: PromptCatalog | None = None,
) -> None:
    """Compile all block details into one summary and run the final feedback loop."""
    if state.stage is not Stage.REVISION:
        raise StateError(f"revision stage requires Revision, got {state.stage.value}")
    if state.pending_blocks():
        raise StateError("revision requires every queued block to be detailed or failed")
    catalog = catalog or default_catalog()
    log = designer.log

    detailed = [task for task in state.block_queue if task.node_id in state.details]
    if not detailed:
        reason = "no block details produced; nothing to summarise"
        _fail(state, log, reason)
        raise StageError(reason)
    detail_texts = [
        f"{task.label}:\n{state.details[task.node_id]}" for task in detailed
    ]
    fork = state.conversation.fork_for_detailing()
    fork.append(ChatMessage("user", catalog.revision_prompt(detail_texts)))
    response = designer.chat(fork.messages)
    fork.append(ChatMessage("assistant", response.content))
    while True:
        verdict = port.give_verdict(VerdictRequest("summary", response.content))
        log.emit(
            {
                "event": ev.EV_VERDICT_GIVEN,
                "subject": "summary",
                "kind": verdict.kind,
                "text": verdict.feedback_text,
            }
        )
        if verdict.accepted:
            state.summary = response.content
            log.emit({"event": ev.EV_SUMMARY_STORED, "text": response.content})
            _advance(state, log, Stage.DONE)
            log.emit({"event": ev.EV_SESSION_DONE})
            return
        fork.append(ChatMessage("user", catalog.feedback_message(verdict.feedback_text)))
        response = designer.chat(fork.messages)
        fork.append(ChatMessage("assistant", response.content))


def drive_session(
    state: SessionState,
    port: ClientPort,
    designer: ChatClient,
    catalog: PromptCatalog | None = None,
    *,
    continue_on_block_failure: bool = True,
) -> SessionState:
    """Advance an already-started session through every remaining stage."""
    log = designer.log
    try:
        architectural_stage(state, port, designer, catalog)
        categorisation_stage(state, designer, catalog)
        for block in list(state.pending_blocks()):
            detailing_stage(
                state,
                block,
                port,
                designer,
                catalog,
                continue_on_failure=continue_on_block_failure,
            )
        revision_stage(state, port, designer, catalog)
    except StageError:
        pass  # session already marked failed with its reason
    except DaqSynthError as exc:
        _fail(state, log, str(exc))
    return state


# --- event-sourcing ----------------------------------------------------------

def apply_event(state: SessionState | None, event: dict) -> SessionState:
    """Replay one persisted event onto the session state."""
    kind = event.get("event")
    if kind == ev.EV_SESSION_STARTED:
        return SessionState(id=event["id"], description=event["description"])
    if state is None:
        raise StateError("event log does not begin with a session_started event")
    if kind == ev.EV_MESSAGE_APPENDED:
        state.conversation.append(ChatMessage(event["role"], event["content"]))
    elif kind == ev.EV_STAGE_ADVANCED:
        state.stage = Stage(event["stage"])
    elif kind == ev.EV_ARCHITECTURE_ACCEPTED:
        dot = event["dot"]
        state.conversation.prune_architecture_loop(dot)
        state.architecture = parse(DotSource(dot))
        state.architecture_dot = dot
    elif kind == ev.EV_BLOCK_QUEUE_SET:
        state.block_queue = [
            BlockTask(b["id"], b["label"], CategoryId(b["category"]))
            for b in event["blocks"]
        ]
    elif kind == ev.EV_DETAIL_STORED:
        state.details[event["block"]] = event["text"]
    elif kind == ev.EV_BLOCK_FAILED:
        state.failed_blocks[event["block"]] = event["reason"]
    elif kind == ev.EV_SUMMARY_STORED:
        state.summary = event["text"]
    elif kind == ev.EV_SESSION_FAILED:
        state.failed = True
        state.failure_reason = event["reason"]
    # remaining event types are transcript-only: they carry no state
    return state


def replay_events(event_seq: Sequence[dict]) -> SessionState:
    state: SessionState | None = None
    for event in event_seq:
        state = apply_event(state, event)
    if state is None:
        raise StateError("empty event log")
    return state
