"""Session event records.

Everything a session does is emitted as one flat JSON-serializable dict:
conversation appends, outgoing model calls, port interactions, stage
transitions, artifacts. The same stream serves three purposes: the persisted
transcript, the event-sourcing log that reconstructs session state, and the
request log that the test harness scans for contract violations.
"""

from __future__ import annotations

from typing import Callable

EV_SESSION_STARTED = "session_started"
EV_MESSAGE_APPENDED = "message_appended"
EV_LLM_CALL = "llm_call"
EV_LLM_ERROR = "llm_error"
EV_QUESTIONS_ASKED = "questions_asked"
EV_ANSWERS_GIVEN = "answers_given"
EV_ANSWERS_PADDED = "answers_padded"
EV_VERDICT_GIVEN = "verdict_given"
EV_DIAGRAM_RETRY = "diagram_retry"
EV_ARCHITECTURE_ACCEPTED = "architecture_accepted"
EV_BLOCK_QUEUE_SET = "block_queue_set"
EV_DETAIL_STARTED = "detail_started"
EV_DETAIL_STORED = "detail_stored"
EV_BLOCK_FAILED = "block_failed"
EV_SUMMARY_STORED = "summary_stored"
EV_STAGE_ADVANCED = "stage_advanced"
EV_SESSION_DONE = "session_done"
EV_SESSION_FAILED = "session_failed"


class EventLog:
    """Ordered in-memory event record with optional append-only sinks."""

    def __init__(self):
        self.events: list[dict] = []
        self._sinks: list[Callable[[dict], None]] = []

    def add_sink(self, sink: Callable[[dict], None]) -> None:
        self._sinks.append(sink)

    def emit(self, event: dict) -> None:
        self.events.append(event)
        for sink in self._sinks:
            sink(event)

    def of_type(self, event_type: str) -> list[dict]:
        return [e for e in self.events if e.get("event") == event_type]
