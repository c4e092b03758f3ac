"""Per-iteration run artifacts and their structural metrics.

A completed (or failed) synthesis iteration is persisted as one directory:
the event transcript, the accepted architecture as canonical DOT (plus SVG
when an external renderer exists), one markdown file per detailed block, the
final summary, and a metrics record. Everything in the directory except the
wall-time figure is a deterministic function of the scripted inputs.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import events as ev
from .diagram import DotSource, parse, render_svg, to_dot, validate
from .events import EventLog
from .flow import (
    ChatClient,
    ClientPort,
    SessionConfigs,
    SessionState,
    Stage,
    drive_session,
    start_session,
)
from .gateway import Backend
from .prompts import CategoryId, PromptCatalog


@dataclass
class Metrics:
    status: str
    block_count: int = 0
    category_histogram: dict[str, int] = field(default_factory=dict)
    questions_architectural: int = 0
    questions_detailing: int = 0
    diagram_retries: int = 0
    feedback_rounds: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    usage_missing_calls: int = 0
    fallback_categorised_blocks: int = 0
    padded_answer_rounds: int = 0
    lint_findings: int = 0
    wall_ms: int = 0

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "block_count": self.block_count,
            "category_histogram": self.category_histogram,
            "questions_architectural": self.questions_architectural,
            "questions_detailing": self.questions_detailing,
            "questions_total": self.questions_architectural + self.questions_detailing,
            "diagram_retries": self.diagram_retries,
            "feedback_rounds": self.feedback_rounds,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "usage_missing_calls": self.usage_missing_calls,
            "fallback_categorised_blocks": self.fallback_categorised_blocks,
            "padded_answer_rounds": self.padded_answer_rounds,
            "lint_findings": self.lint_findings,
            "wall_ms": self.wall_ms,
        }


@dataclass
class RunArtifact:
    session_id: str
    status: str  # "done" | "failed"
    state: SessionState
    events: list[dict]
    metrics: Metrics
    out_dir: Path | None = None


def collect_metrics(artifact: RunArtifact) -> Metrics:
    """Deterministic structural metrics from the transcript and session state.

    The category histogram always carries all nine bins and sums to the block
    count; wall time is the only field outside the deterministic core.
    """
    state = artifact.state
    events = artifact.events
    histogram = {category.value: 0 for category in CategoryId}
    for task in state.block_queue:
        histogram[task.category.value] += 1

    questions_arch = 0
    questions_detail = 0
    for event in events:
        if event.get("event") == ev.EV_QUESTIONS_ASKED:
            if event.get("stage") == "architectural":
                questions_arch += len(event["questions"])
            else:
                questions_detail += len(event["questions"])

    prompt_tokens = 0
    completion_tokens = 0
    usage_missing = 0
    for event in events:
        if event.get("event") == ev.EV_LLM_CALL:
            response = event["response"]
            prompt_tokens += response.get("prompt_tokens", 0)
            completion_tokens += response.get("completion_tokens", 0)
            if response.get("usage_missing"):
                usage_missing += 1

    fallback = 0
    for event in events:
        if event.get("event") == ev.EV_BLOCK_QUEUE_SET:
            fallback = len(event.get("fallback", []))

    lint_count = 0
    if state.architecture is not None:
        lint_count = len(validate(state.architecture))

    return Metrics(
        status=artifact.status,
        block_count=len(state.block_queue),
        category_histogram=histogram,
        questions_architectural=questions_arch,
        questions_detailing=questions_detail,
        diagram_retries=sum(
            1 for e in events if e.get("event") == ev.EV_DIAGRAM_RETRY
        ),
        feedback_rounds=sum(
            1
            for e in events
            if e.get("event") == ev.EV_VERDICT_GIVEN and e.get("kind") == "revise"
        ),
        prompt_tokens=prompt_tokens,
        completion_tokens=completion_tokens,
        usage_missing_calls=usage_missing,
        fallback_categorised_blocks=fallback,
        padded_answer_rounds=sum(
            1 for e in events if e.get("event") == ev.EV_ANSWERS_PADDED
        ),
        lint_findings=lint_count,
        wall_ms=artifact.metrics.wall_ms if artifact.metrics else 0,
    )


_UNSAFE_FILENAME_RE = re.compile(r"[^A-Za-z0-9._-]")


def block_filename(node_id: str) -> str:
    name = _UNSAFE_FILENAME_RE.sub("_", node_id) or "_"
    return f"{name}.md"


def artifact_status(state: SessionState) -> str:
    """"done" demands completeness: every queued block detailed, no failures."""
    if state.failed or state.stage is not Stage.DONE or state.failed_blocks:
        return "failed"
    return "done"


def write_run_artifact(
    state: SessionState,
    events: list[dict],
    out_dir: str | Path,
    *,
    wall_ms: int = 0,
) -> RunArtifact:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    status = artifact_status(state)
    artifact = RunArtifact(
        session_id=state.id,
        status=status,
        state=state,
        events=events,
        metrics=Metrics(status=status, wall_ms=wall_ms),
        out_dir=out,
    )
    artifact.metrics = collect_metrics(artifact)
    artifact.metrics.wall_ms = wall_ms

    with open(out / "session.jsonl", "w", encoding="utf-8") as fh:
        for event in events:
            fh.write(json.dumps(event, ensure_ascii=False) + "\n")

    if state.architecture is not None:
        canonical = to_dot(state.architecture)
        (out / "architecture.dot").write_text(canonical.text + "\n", encoding="utf-8")
        render_svg(canonical.text, out / "architecture.svg")

    if state.details:
        blocks_dir = out / "blocks"
        blocks_dir.mkdir(exist_ok=True)
        labels = {task.node_id: task.label for task in state.block_queue}
        for node_id, text in state.details.items():
            path = blocks_dir / block_filename(node_id)
            path.write_text(
                f"# {labels.get(node_id, node_id)}\n\n{text}\n", encoding="utf-8"
            )

    if state.summary is not None:
        (out / "summary.md").write_text(state.summary + "\n", encoding="utf-8")

    (out / "metrics.json").write_text(
        json.dumps(artifact.metrics.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return artifact


def run_session(
    description: str,
    port: ClientPort,
    configs: SessionConfigs,
    backend: Backend,
    *,
    session_id: str | None = None,
    catalog: PromptCatalog | None = None,
    log: EventLog | None = None,
    out_dir: str | Path | None = None,
    continue_on_block_failure: bool = True,
) -> RunArtifact:
    """Drive one full session to Done (or failure) and persist its artifacts."""
    log = log or EventLog()
    started = time.monotonic()
    state = start_session(
        description, configs, catalog=catalog, log=log, session_id=session_id
    )
    designer = ChatClient(configs.designer, backend, log, actor="designer")
    drive_session(
        state,
        port,
        designer,
        catalog,
        continue_on_block_failure=continue_on_block_failure,
    )
    wall_ms = int((time.monotonic() - started) * 1000)
    if out_dir is not None:
        return write_run_artifact(state, log.events, out_dir, wall_ms=wall_ms)
    status = artifact_status(state)
    artifact = RunArtifact(
        session_id=state.id,
        status=status,
        state=state,
        events=log.events,
        metrics=Metrics(status=status, wall_ms=wall_ms),
    )
    artifact.metrics = collect_metrics(artifact)
    artifact.metrics.wall_ms = wall_ms
    return artifact


def load_metrics(run_dir: str | Path) -> dict:
    return json.loads((Path(run_dir) / "metrics.json").read_text(encoding="utf-8"))


def parse_architecture_file(run_dir: str | Path):
    text = (Path(run_dir) / "architecture.dot").read_text(encoding="utf-8")
    return parse(DotSource(text.rstrip("\n")))
