"""DOT diagram toolkit.

Extracts DOT payloads from model output, parses a deliberate subset of the
language into a block graph, lints the graph for the failure shapes seen in
generated diagrams, and re-emits canonical DOT. Full DOT (subgraphs, ports,
HTML labels, undirected graphs) is rejected with a positioned error so the
flow engine can ask for a regeneration instead of guessing.
"""

from __future__ import annotations

import re
import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DotParseError, ExtractionError, UsageError

_DIGRAPH_RE = re.compile(r"\bdigraph\b")
_FENCE_RE = re.compile(r"```[^\n`]*\n(.*?)```", re.DOTALL)

# Array node labels: "8x Strain Gauge" or "Strain Gauge (x8)".
_MULT_PREFIX_RE = re.compile(r"^(\d+)x\s+(.+)$", re.DOTALL)
_MULT_SUFFIX_RE = re.compile(r"^(.+?)\s*\(x(\d+)\)$", re.DOTALL)


@dataclass(frozen=True)
class DotSource:
    """Raw DOT digraph source: starts at the digraph keyword, braces balanced."""

    text: str

    def __post_init__(self):
        stripped = self.text.lstrip()
        if not stripped.startswith("digraph"):
            raise ExtractionError("DOT payload must begin with the digraph keyword")
        _check_balanced(self.text)


@dataclass
class BlockNode:
    id: str
    label: str
    multiplicity: int = 1


@dataclass
class BlockEdge:
    src: str
    dst: str
    double_ended: bool = False


@dataclass
class BlockGraph:
    nodes: list[BlockNode] = field(default_factory=list)
    edges: list[BlockEdge] = field(default_factory=list)

    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    def get(self, node_id: str) -> BlockNode:
        for node in self.nodes:
            if node.id == node_id:
                return node
        raise UsageError(f"unknown node id {node_id!r}")

    def check(self) -> None:
        ids = self.node_ids()
        if len(set(ids)) != len(ids):
            raise UsageError("node ids must be unique")
        known = set(ids)
        for edge in self.edges:
            if edge.src not in known or edge.dst not in known:
                raise UsageError(f"edge {edge.src!r} -> {edge.dst!r} references unknown node")
        for node in self.nodes:
            if node.multiplicity < 1:
                raise UsageError(f"node {node.id!r} multiplicity must be >= 1")


def _check_balanced(text: str) -> None:
    """Brace balance check that ignores braces inside quoted strings."""
    depth = 0
    in_string = False
    escaped = False
    seen_open = False
    for ch in text:
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
            seen_open = True
        elif ch == "}":
            depth -= 1
            if depth < 0:
                raise ExtractionError("unbalanced braces in DOT payload")
    if in_string or depth != 0 or not seen_open:
        raise ExtractionError("unbalanced braces in DOT payload")


def _slice_digraph(text: str) -> str:
    """Slice from the first digraph keyword through its matching closing brace."""
    match = _DIGRAPH_RE.search(text)
    if match is None:
        raise ExtractionError("no digraph keyword found")
    brace = text.find("{", match.end())
    if brace < 0:
        raise ExtractionError("digraph keyword without an opening brace")
    depth = 0
    in_string = False
    escaped = False
    for i in range(brace, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[match.start() : i + 1]
    raise ExtractionError("unbalanced braces in DOT payload")


def extract_dot(model_output: str) -> DotSource:
    """Pull the DOT payload out of prose model output.

    Preference order: the first fenced code block containing a digraph, then a
    bare digraph sliced through its matching closing brace. The returned text
    is always a verbatim substring of the input.
    """
    for fence in _FENCE_RE.finditer(model_output):
        block = fence.group(1)
        if _DIGRAPH_RE.search(block):
            return DotSource(_slice_digraph(block))
    if _DIGRAPH_RE.search(model_output):
        return DotSource(_slice_digraph(model_output))
    raise ExtractionError("no DOT digraph payload found in model output")


# --- tokenizer -------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str  # "id", "punct", "arrow"
    value: str
    line: int
    col: int
    quoted: bool = False


_ID_START = re.compile(r"[A-Za-z_-￿]")
_ID_CHAR = re.compile(r"[A-Za-z0-9_-￿]")
_NUM_RE = re.compile(r"-?(\.\d+|\d+(\.\d*)?)")


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    line = 1
    col = 1
    n = len(text)

    def advance(count: int) -> None:
        nonlocal i, line, col
        for _ in range(count):
            if text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            advance(1)
            continue
        if text.startswith("//", i):
            end = text.find("\n", i)
            advance((end if end >= 0 else n) - i)
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i)
            if end < 0:
                raise DotParseError("unterminated comment", line, col)
            advance(end + 2 - i)
            continue
        if ch == '"':
            start_line, start_col = line, col
            j = i + 1
            out: list[str] = []
            while j < n:
                c = text[j]
                if c == "\\" and j + 1 < n:
                    nxt = text[j + 1]
                    if nxt in ('"', "\\"):
                        out.append(nxt)
                    else:
                        out.append(c)
                        out.append(nxt)
                    j += 2
                    continue
                if c == '"':
                    break
                out.append(c)
                j += 1
            else:
                raise DotParseError("unterminated string", start_line, start_col)
            if j >= n:
                raise DotParseError("unterminated string", start_line, start_col)
            tokens.append(_Token("id", "".join(out), start_line, start_col, quoted=True))
            advance(j + 1 - i)
            continue
        if text.startswith("->", i):
            tokens.append(_Token("arrow", "->", line, col))
            advance(2)
            continue
        if text.startswith("--", i):
            raise DotParseError("undirected edges are not supported in a digraph", line, col)
        if ch in "{}[]=;,":
            tokens.append(_Token("punct", ch, line, col))
            advance(1)
            continue
        if ch == "<":
            raise DotParseError("HTML labels are not supported", line, col)
        if ch == ":":
            raise DotParseError("node ports are not supported", line, col)
        m = _NUM_RE.match(text, i)
        if m and m.start() == i and not _ID_START.match(ch):
            tokens.append(_Token("id", m.group(0), line, col))
            advance(len(m.group(0)))
            continue
        if _ID_START.match(ch):
            j = i + 1
            while j < n and _ID_CHAR.match(text[j]):
                j += 1
            tokens.append(_Token("id", text[i:j], line, col))
            advance(j - i)
            continue
        raise DotParseError(f"unexpected character {ch!r}", line, col)
    return tokens


# --- parser ----------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: list[_Token]):
        self._tokens = tokens
        self._pos = 0
        self._nodes: dict[str, BlockNode] = {}
        self._explicit_label: set[str] = set()
        self._edges: list[BlockEdge] = []

    def _peek(self) -> _Token | None:
        return self._tokens[self._pos] if self._pos < len(self._tokens) else None

    def _next(self, expected: str | None = None) -> _Token:
        tok = self._peek()
        if tok is None:
            last = self._tokens[-1] if self._tokens else None
            raise DotParseError(
                f"unexpected end of input{f', expected {expected!r}' if expected else ''}",
                last.line if last else 1,
                last.col if last else 1,
            )
        self._pos += 1
        return tok

    def _expect(self, value: str) -> _Token:
        tok = self._next(expected=value)
        if tok.value != value or tok.quoted:
            raise DotParseError(f"expected {value!r}, found {tok.value!r}", tok.line, tok.col)
        return tok

    def parse(self) -> BlockGraph:
        head = self._next(expected="digraph")
        if head.quoted or head.value != "digraph":
            if head.value in ("graph", "strict"):
                raise DotParseError("only plain digraph is supported", head.line, head.col)
            raise DotParseError(f"expected 'digraph', found {head.value!r}", head.line, head.col)
        tok = self._next(expected="{")
        if tok.kind == "id":  # optional graph name
            tok = self._next(expected="{")
        if tok.value != "{" or tok.kind != "punct":
            raise DotParseError(f"expected '{{', found {tok.value!r}", tok.line, tok.col)
        while True:
            tok = self._peek()
            if tok is None:
                raise DotParseError("missing closing brace", 1, 1)
            if tok.kind == "punct" and tok.value == "}":
                self._next()
                break
            self._statement()
        trailing = self._peek()
        if trailing is not None:
            raise DotParseError(
                f"content after closing brace: {trailing.value!r}", trailing.line, trailing.col
            )
        graph = BlockGraph(nodes=list(self._nodes.values()), edges=self._edges)
        graph.check()
        return graph

    def _statement(self) -> None:
        tok = self._next()
        if tok.kind == "punct" and tok.value == ";":
            return
        if tok.kind != "id":
            raise DotParseError(f"unexpected {tok.value!r}", tok.line, tok.col)
        if not tok.quoted and tok.value == "subgraph":
            raise DotParseError("subgraphs are not supported", tok.line, tok.col)
        if not tok.quoted and tok.value in ("node", "edge", "graph"):
            # default-attribute statement: honoured for nothing, skipped whole
            self._parse_attrs()
            self._eat_semicolon()
            return

        nxt = self._peek()
        if nxt is not None and nxt.kind == "punct" and nxt.value == "=":
            self._next()
            self._next(expected="attribute value")  # graph attribute like rankdir=LR
            self._eat_semicolon()
            return

        chain = [tok]
        while True:
            nxt = self._peek()
            if nxt is not None and nxt.kind == "arrow":
                self._next()
                target = self._next(expected="node id")
                if target.kind != "id":
                    raise DotParseError(
                        f"expected node id after '->', found {target.value!r}",
                        target.line,
                        target.col,
                    )
                chain.append(target)
            else:
                break
        attrs = self._parse_attrs()
        self._eat_semicolon()

        if len(chain) == 1:
            self._declare_node(chain[0], attrs)
        else:
            double = attrs.get("dir", "") == "both"
            for t in chain:
                self._ensure_node(t.value)
            for a, b in zip(chain, chain[1:]):
                self._edges.append(BlockEdge(a.value, b.value, double_ended=double))

    def _parse_attrs(self) -> dict[str, str]:
        attrs: dict[str, str] = {}
        while True:
            tok = self._peek()
            if tok is None or tok.kind != "punct" or tok.value != "[":
                return attrs
            self._next()
            while True:
                tok = self._next(expected="attribute name or ']'")
                if tok.kind == "punct" and tok.value == "]":
                    break
                if tok.kind == "punct" and tok.value in (",", ";"):
                    continue
                if tok.kind != "id":
                    raise DotParseError(
                        f"unexpected {tok.value!r} in attribute list", tok.line, tok.col
                    )
                self._expect("=")
                value = self._next(expected="attribute value")
                if value.kind != "id":
                    raise DotParseError(
                        f"expected attribute value, found {value.value!r}",
                        value.line,
                        value.col,
                    )
                attrs[tok.value] = value.value

    def _eat_semicolon(self) -> None:
        tok = self._peek()
        if tok is not None and tok.kind == "punct" and tok.value == ";":
            self._next()

    def _ensure_node(self, node_id: str) -> BlockNode:
        node = self._nodes.get(node_id)
        if node is None:
            node = BlockNode(id=node_id, label=node_id, multiplicity=1)
            self._nodes[node_id] = node
        return node

    def _declare_node(self, tok: _Token, attrs: dict[str, str]) -> None:
        node = self._ensure_node(tok.value)
        raw_label = attrs.get("label")
        if raw_label is None:
            return
        if tok.value in self._explicit_label:
            current = f"{node.multiplicity}x {node.label}" if node.multiplicity > 1 else node.label
            if raw_label != current:
                raise DotParseError(
                    f"duplicate node {tok.value!r} with conflicting labels",
                    tok.line,
                    tok.col,
                )
            return
        label, multiplicity = _split_multiplicity(raw_label)
        node.label = label
        node.multiplicity = multiplicity
        self._explicit_label.add(tok.value)


def _split_multiplicity(raw_label: str) -> tuple[str, int]:
    m = _MULT_PREFIX_RE.match(raw_label)
    if m and int(m.group(1)) >= 1:
        return m.group(2), int(m.group(1))
    m = _MULT_SUFFIX_RE.match(raw_label)
    if m and int(m.group(2)) >= 1:
        return m.group(1), int(m.group(2))
    return raw_label, 1


def parse(src: DotSource) -> BlockGraph:
    """Parse the supported DOT subset into a block graph."""
    return _Parser(_tokenize(src.text)).parse()


# --- lint ------------------------------------------------------------------

@dataclass(frozen=True)
class LintFinding:
    severity: str  # "error" | "warning"
    code: str
    message: str


_TRAILING_INDEX_RE = re.compile(r"[\s_]*\d+$")


def _normalized_label(node: BlockNode) -> str:
    return _TRAILING_INDEX_RE.sub("", node.label).strip().casefold()


def validate(graph: BlockGraph) -> list[LintFinding]:
    """Structural lint; an empty findings list means the diagram is sound.

    Electrical semantics (filter placement, arrow polarity) are deliberately
    not judged here.
    """
    graph.check()
    if not graph.nodes:
        return [LintFinding("error", "empty-graph", "diagram has no blocks")]

    findings: list[LintFinding] = []
    in_degree = {n.id: 0 for n in graph.nodes}
    out_degree = {n.id: 0 for n in graph.nodes}
    for edge in graph.edges:
        out_degree[edge.src] += 1
        in_degree[edge.dst] += 1

    if len(graph.nodes) >= 2:
        for node in graph.nodes:
            if in_degree[node.id] == 0 and out_degree[node.id] == 0:
                findings.append(
                    LintFinding(
                        "error",
                        "disconnected-node",
                        f"block {node.label!r} has no connections",
                    )
                )

    if _has_cycle(graph):
        findings.append(LintFinding("warning", "cycle", "diagram contains a cycle"))

    findings.extend(_array_candidates(graph))

    if graph.edges and not any(out_degree[n.id] == 0 for n in graph.nodes):
        findings.append(
            LintFinding("warning", "no-sink", "no terminal block: every block has an outgoing edge")
        )

    errors = [f for f in findings if f.severity == "error"]
    warnings = [f for f in findings if f.severity == "warning"]
    return errors + warnings


def _has_cycle(graph: BlockGraph) -> bool:
    adjacency: dict[str, list[str]] = {n.id: [] for n in graph.nodes}
    for edge in graph.edges:
        adjacency[edge.src].append(edge.dst)
    state: dict[str, int] = {}  # 1 = visiting, 2 = done

    def visit(node_id: str) -> bool:
        state[node_id] = 1
        for succ in adjacency[node_id]:
            mark = state.get(succ)
            if mark == 1:
                return True
            if mark is None and visit(succ):
                return True
        state[node_id] = 2
        return False

    return any(state.get(n.id) is None and visit(n.id) for n in graph.nodes)


def _array_candidates(graph: BlockGraph) -> list[LintFinding]:
    """Clusters of structurally identical sibling blocks that should be arrays."""
    successors: dict[str, list[str]] = {n.id: [] for n in graph.nodes}
    predecessors: dict[str, list[str]] = {n.id: [] for n in graph.nodes}
    by_id = {n.id: n for n in graph.nodes}
    for edge in graph.edges:
        successors[edge.src].append(edge.dst)
        predecessors[edge.dst].append(edge.src)

    def signature(node: BlockNode) -> tuple:
        succ = sorted(_normalized_label(by_id[s]) for s in successors[node.id])
        pred = sorted(_normalized_label(by_id[p]) for p in predecessors[node.id])
        return (_normalized_label(node), tuple(succ), tuple(pred))

    groups: dict[tuple, list[BlockNode]] = {}
    for node in graph.nodes:
        if node.multiplicity == 1:
            groups.setdefault(signature(node), []).append(node)

    findings = []
    for sig, members in groups.items():
        if len(members) >= 2 and sig[0]:
            findings.append(
                LintFinding(
                    "warning",
                    "array-candidate",
                    f"{len(members)} parallel {members[0].label!r}-like blocks "
                    "could be a single array node",
                )
            )
    return findings


# --- emission ---------------------------------------------------------------

def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _node_label(node: BlockNode) -> str:
    return f"{node.multiplicity}x {node.label}" if node.multiplicity > 1 else node.label


def to_dot(graph: BlockGraph) -> DotSource:
    """Deterministic canonical emission; parse(to_dot(g)) == g.

    Labels that themselves look like array labels ("8x Foo", "Foo (x8)") are
    reserved as the multiplicity encoding and must not be used as plain labels.
    """
    graph.check()
    lines = ["digraph architecture {"]
    for node in graph.nodes:
        lines.append(f"  {_quote(node.id)} [label={_quote(_node_label(node))}];")
    for edge in graph.edges:
        suffix = " [dir=both];" if edge.double_ended else ";"
        lines.append(f"  {_quote(edge.src)} -> {_quote(edge.dst)}{suffix}")
    lines.append("}")
    return DotSource("\n".join(lines))


def topological_order(graph: BlockGraph) -> list[str]:
    """Sources-first order, ties broken by (label, id); cycles fall back to
    (label, id) order for the remaining nodes."""
    graph.check()
    in_degree = {n.id: 0 for n in graph.nodes}
    adjacency: dict[str, list[str]] = {n.id: [] for n in graph.nodes}
    for edge in graph.edges:
        adjacency[edge.src].append(edge.dst)
        in_degree[edge.dst] += 1
    by_id = {n.id: n for n in graph.nodes}

    def sort_key(node_id: str) -> tuple[str, str]:
        return (by_id[node_id].label, node_id)

    ready = sorted((nid for nid, deg in in_degree.items() if deg == 0), key=sort_key)
    order: list[str] = []
    while ready:
        current = ready.pop(0)
        order.append(current)
        newly_ready = []
        for succ in adjacency[current]:
            in_degree[succ] -= 1
            if in_degree[succ] == 0:
                newly_ready.append(succ)
        ready = sorted(ready + newly_ready, key=sort_key)
    leftover = [nid for nid in by_id if nid not in set(order)]
    order.extend(sorted(leftover, key=sort_key))
    return order


def render_svg_bytes(dot_text: str) -> bytes | None:
    """Render DOT to SVG via an external `dot` binary when one is on PATH.

    Returns None (never raises) when no renderer is available or it fails;
    callers fall back to client-side rendering.
    """
    binary = shutil.which("dot")
    if binary is None:
        return None
    try:
        result = subprocess.run(
            [binary, "-Tsvg"],
            input=dot_text.encode("utf-8"),
            capture_output=True,
            timeout=30,
        )
    except (OSError, subprocess.SubprocessError):
        return None
    if result.returncode != 0:
        return None
    return result.stdout


def render_svg(dot_text: str, out_path: str | Path) -> bool:
    rendered = render_svg_bytes(dot_text)
    if rendered is None:
        return False
    Path(out_path).write_bytes(rendered)
    return True
