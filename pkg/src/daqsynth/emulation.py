"""Automated user emulation.

Two client ports stand in for the human: the direct context embeds every
requirement in the initial description and answers all questions with empty
strings; the open context holds the requirements back and lets a second,
low-temperature model answer the designer's questions strictly from the list.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Protocol, Sequence

from . import events as ev
from .conversation import Conversation
from .diagram import validate
from .errors import UsageError
from .events import EventLog
from .flow import ChatClient, FeedbackVerdict, VerdictRequest, accept, revise
from .gateway import Backend, ChatMessage, ModelConfig
from .prompts import PromptCatalog, default_catalog, format_numbered

_LISTED_LINE_RE = re.compile(r"^\s*(?:\d{1,3}[.)]\s*|[-*•]\s+)(\S.*?)\s*$")


class EmulationMode(enum.Enum):
    DIRECT = "direct"
    OPEN = "open"


@dataclass(frozen=True)
class RequirementList:
    """Numbered requirement lines, kept verbatim including their numbering."""

    items: tuple[str, ...]

    def __post_init__(self):
        if not self.items:
            raise UsageError("requirement list must be nonempty")

    def as_text(self) -> str:
        return "\n".join(self.items)


class VerdictPolicy(Protocol):
    def verdict(self, request: VerdictRequest) -> FeedbackVerdict: ...


class AcceptFirstPolicy:
    """Accept every artifact on the first round."""

    def verdict(self, request: VerdictRequest) -> FeedbackVerdict:
        return accept()


class StructuralVerdictPolicy:
    """Accept structurally sound artifacts; revise once with the lint findings
    as feedback, then accept whatever comes back.

    Objective and reproducible: diagrams are judged by the diagram linter,
    text artifacts only by nonemptiness.
    """

    def __init__(self):
        self._revised: set[tuple[str, str | None]] = set()

    def verdict(self, request: VerdictRequest) -> FeedbackVerdict:
        problems: list[str] = []
        if request.kind == "architecture" and request.graph is not None:
            problems = [
                finding.message
                for finding in validate(request.graph)
                if finding.severity == "error"
            ]
        elif not request.content.strip():
            problems = ["the artifact is empty"]
        key = (request.kind, request.block)
        if problems and key not in self._revised:
            self._revised.add(key)
            return revise("; ".join(problems))
        return accept()


class ScriptedVerdictPolicy:
    """Fixed verdict sequence for deterministic tests; accepts once exhausted."""

    def __init__(self, verdicts: Sequence[FeedbackVerdict]):
        self._verdicts = list(verdicts)
        self._cursor = 0

    def verdict(self, request: VerdictRequest) -> FeedbackVerdict:
        if self._cursor < len(self._verdicts):
            out = self._verdicts[self._cursor]
            self._cursor += 1
            return out
        return accept()


class DirectPort:
    """Client port of the direct context: never provides answers."""

    def __init__(self, policy: VerdictPolicy | None = None):
        self._policy = policy or StructuralVerdictPolicy()

    def answer_questions(self, questions: list[str]) -> list[str]:
        return ["" for _ in questions]

    def give_verdict(self, request: VerdictRequest) -> FeedbackVerdict:
        return self._policy.verdict(request)


def direct_port(policy: VerdictPolicy | None = None) -> DirectPort:
    return DirectPort(policy)


class OpenPort:
    """Client port of the open context: a second model answers from the
    requirement list, and only from it."""

    def __init__(
        self,
        requirements: RequirementList,
        emulator_config: ModelConfig,
        backend: Backend,
        *,
        policy: VerdictPolicy | None = None,
        log: EventLog | None = None,
        catalog: PromptCatalog | None = None,
    ):
        self._policy = policy or StructuralVerdictPolicy()
        self._catalog = catalog or default_catalog()
        self._client = ChatClient(
            emulator_config, backend, log or EventLog(), actor="emulator"
        )
        self._conversation = Conversation()
        self._conversation.append(
            ChatMessage(
                "system",
                self._catalog.render("emulator_system", requirements=requirements.as_text()),
            )
        )

    def answer_questions(self, questions: list[str]) -> list[str]:
        if not questions:
            return []
        self._conversation.append(
            ChatMessage(
                "user",
                self._catalog.render(
                    "emulator_questions", questions=format_numbered(questions)
                ),
            )
        )
        response = self._client.chat(self._conversation.messages)
        self._conversation.append(ChatMessage("assistant", response.content))
        answers, padded = split_numbered_answers(response.content, len(questions))
        if padded:
            self._client.log.emit(
                {
                    "event": ev.EV_ANSWERS_PADDED,
                    "expected": len(questions),
                    "received": len(questions) - padded,
                }
            )
        return answers

    def give_verdict(self, request: VerdictRequest) -> FeedbackVerdict:
        return self._policy.verdict(request)


def open_port(
    requirements: RequirementList,
    emulator_config: ModelConfig,
    backend: Backend,
    *,
    policy: VerdictPolicy | None = None,
    log: EventLog | None = None,
    catalog: PromptCatalog | None = None,
) -> OpenPort:
    return OpenPort(
        requirements, emulator_config, backend, policy=policy, log=log, catalog=catalog
    )


def split_numbered_answers(reply: str, expected: int) -> tuple[list[str], int]:
    """Mirror of the designer-side question parsing, without the cap.

    Returns exactly `expected` answers plus how many had to be padded in.
    """
    answers = [
        m.group(1) for line in reply.splitlines() if (m := _LISTED_LINE_RE.match(line))
    ]
    if not answers and expected == 1 and reply.strip():
        answers = [reply.strip()]
    if len(answers) > expected:
        answers = answers[:expected]
    padded = expected - len(answers)
    answers.extend("" for _ in range(padded))
    return answers, padded


def compose_direct_description(testbench) -> str:
    """Direct-context entry point: description plus the verbatim requirements."""
    return f"{testbench.description}\n{testbench.requirements.as_text()}"
