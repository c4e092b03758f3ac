"""Shared builders for scripted-session fixtures.

A scripted backend is strictly positional, so these helpers compute the exact
response order a session will consume: architectural questions, (open mode:
one emulator reply), the diagram attempts, the categorisation reply, one
detail per block in the engine's topological order, and the summary.
"""

from __future__ import annotations

from daqsynth.diagram import DotSource, parse, topological_order

QUESTIONS_3 = (
    "1. What is the supply voltage?\n"
    "2. What range must be measured?\n"
    "3. What sampling rate applies?"
)

SUMMARY_TEXT = "Summary of the solution with every numerical value kept."

CHAIN_DOT = """digraph G {
  Pot [label="Potentiometer"];
  Amp [label="Amplifier"];
  Fil [label="Anti-aliasing Filter"];
  DAQ [label="DAQ"];
  Pot -> Amp;
  Amp -> Fil;
  Fil -> DAQ;
}"""

CHAIN_CATEGORIES = {
    "Potentiometer": "Sensor",
    "Amplifier": "Amplification",
    "Anti-aliasing Filter": "Filtering",
    "DAQ": "Analogue-digital converter",
}


def fenced(dot: str) -> str:
    return f"Here is the proposed architecture:\n```dot\n{dot}\n```"


def categorisation_reply(categories: dict[str, str]) -> str:
    return "\n".join(f"{label}: {category}" for label, category in categories.items())


def block_order(dot: str) -> list[tuple[str, str]]:
    """(node id, label) pairs in the order the engine details them."""
    graph = parse(DotSource(dot))
    return [(node_id, graph.get(node_id).label) for node_id in topological_order(graph)]


def sentinel_for(node_id: str) -> str:
    return f"@@SENTINEL[{node_id}]@@"


def detail_text(node_id: str, label: str, *, sentinel: bool = False) -> str:
    text = f"Specification of the {label} block with explicit values."
    if sentinel:
        text += f" {sentinel_for(node_id)}"
    return text


def plan_responses(
    *,
    mode: str = "direct",
    dot: str = CHAIN_DOT,
    categories: dict[str, str] | None = None,
    questions: str | None = QUESTIONS_3,
    emulator_reply: str | None = None,
    bad_diagrams: tuple[str, ...] = (),
    extra_diagrams: tuple[str, ...] = (),
    details: dict[str, str] | None = None,
    sentinel: bool = False,
    summary: str = SUMMARY_TEXT,
) -> list[str]:
    """Response list for one session, in backend consumption order.

    `bad_diagrams` are unparseable payloads emitted before the first good
    diagram (each triggers a regeneration request); `extra_diagrams` are
    parseable diagrams the port will reject before accepting the final one.
    """
    categories = categories if categories is not None else CHAIN_CATEGORIES
    responses: list[str] = []
    if questions is not None:
        responses.append(questions)
        if mode == "open":
            if emulator_reply is None:
                count = len([ln for ln in questions.splitlines() if ln.strip()])
                emulator_reply = "\n".join(f"{i}. I don't know" for i in range(1, count + 1))
            responses.append(emulator_reply)
    responses.extend(bad_diagrams)
    responses.extend(fenced(d) for d in extra_diagrams)
    responses.append(fenced(dot))
    responses.append(categorisation_reply(categories))
    for node_id, label in block_order(dot):
        if details is not None and label in details:
            responses.append(details[label])
        else:
            responses.append(detail_text(node_id, label, sentinel=sentinel))
    responses.append(summary)
    return responses
