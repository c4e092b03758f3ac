/**
 * Client-side rendering for architecture diagrams: a small DOT digraph parser
 * (node statements with labels, -> edges, dir=both) plus a layered SVG layout,
 * so the UI never depends on a server-side renderer. Array nodes ("8x Sensor")
 * are drawn once with a multiplicity badge.
 */

export interface DiagramNode {
  id: string;
  label: string;
  multiplicity: number;
}

export interface DiagramEdge {
  src: string;
  dst: string;
  doubleEnded: boolean;
}

export interface Diagram {
  nodes: DiagramNode[];
  edges: DiagramEdge[];
}

type Token =
  | { kind: "id"; value: string; quoted: boolean }
  | { kind: "punct"; value: string }
  | { kind: "arrow" };

class DotError extends Error {}

function tokenize(text: string): Token[] {
  const tokens: Token[] = [];
  let i = 0;
  const n = text.length;
  while (i < n) {
    const ch = text[i];
    if (ch === " " || ch === "\t" || ch === "\r" || ch === "\n") {
      i += 1;
      continue;
    }
    if (text.startsWith("//", i)) {
      const end = text.indexOf("\n", i);
      i = end < 0 ? n : end;
      continue;
    }
    if (text.startsWith("/*", i)) {
      const end = text.indexOf("*/", i);
      if (end < 0) throw new DotError("unterminated comment");
      i = end + 2;
      continue;
    }
    if (ch === '"') {
      let j = i + 1;
      let value = "";
      while (j < n && text[j] !== '"') {
        if (text[j] === "\\" && j + 1 < n && (text[j + 1] === '"' || text[j + 1] === "\\")) {
          value += text[j + 1];
          j += 2;
        } else {
          value += text[j];
          j += 1;
        }
      }
      if (j >= n) throw new DotError("unterminated string");
      tokens.push({ kind: "id", value, quoted: true });
      i = j + 1;
      continue;
    }
    if (text.startsWith("->", i)) {
      tokens.push({ kind: "arrow" });
      i += 2;
      continue;
    }
    if ("{}[]=;,".includes(ch)) {
      tokens.push({ kind: "punct", value: ch });
      i += 1;
      continue;
    }
    const match = /^[A-Za-z0-9_.-￿-]+/.exec(text.slice(i));
    if (match) {
      tokens.push({ kind: "id", value: match[0], quoted: false });
      i += match[0].length;
      continue;
    }
    throw new DotError(`unexpected character ${JSON.stringify(ch)}`);
  }
  return tokens;
}

function splitMultiplicity(label: string): { label: string; multiplicity: number } {
  const prefix = /^(\d+)x\s+(.+)$/s.exec(label);
  if (prefix && Number(prefix[1]) >= 1) {
    return { label: prefix[2], multiplicity: Number(prefix[1]) };
  }
  const suffix = /^(.+?)\s*\(x(\d+)\)$/s.exec(label);
  if (suffix && Number(suffix[2]) >= 1) {
    return { label: suffix[1], multiplicity: Number(suffix[2]) };
  }
  return { label, multiplicity: 1 };
}

export function parseDot(text: string): Diagram {
  const tokens = tokenize(text);
  let pos = 0;
  const peek = () => tokens[pos];
  const next = (): Token => {
    const token = tokens[pos];
    if (!token) throw new DotError("unexpected end of input");
    pos += 1;
    return token;
  };

  const head = next();
  if (head.kind !== "id" || head.quoted || head.value !== "digraph") {
    throw new DotError("expected digraph");
  }
  let brace = next();
  if (brace.kind === "id") brace = next(); // optional graph name
  if (brace.kind !== "punct" || brace.value !== "{") {
    throw new DotError("expected {");
  }

  const nodes = new Map<string, DiagramNode>();
  const edges: DiagramEdge[] = [];
  const ensure = (id: string): DiagramNode => {
    let node = nodes.get(id);
    if (!node) {
      node = { id, label: id, multiplicity: 1 };
      nodes.set(id, node);
    }
    return node;
  };

  const parseAttrs = (): Map<string, string> => {
    const attrs = new Map<string, string>();
    while (peek() && peek()!.kind === "punct" && (peek() as { value: string }).value === "[") {
      next();
      for (;;) {
        const token = next();
        if (token.kind === "punct" && token.value === "]") break;
        if (token.kind === "punct" && (token.value === "," || token.value === ";")) continue;
        if (token.kind !== "id") throw new DotError("bad attribute list");
        const eq = next();
        if (eq.kind !== "punct" || eq.value !== "=") throw new DotError("expected =");
        const value = next();
        if (value.kind !== "id") throw new DotError("expected attribute value");
        attrs.set(token.value, value.value);
      }
    }
    return attrs;
  };

  for (;;) {
    const token = peek();
    if (!token) throw new DotError("missing closing brace");
    if (token.kind === "punct" && token.value === "}") {
      next();
      break;
    }
    const first = next();
    if (first.kind === "punct" && first.value === ";") continue;
    if (first.kind !== "id") throw new DotError("unexpected statement");
    if (!first.quoted && (first.value === "node" || first.value === "edge" || first.value === "graph")) {
      parseAttrs();
      continue;
    }
    if (!first.quoted && first.value === "subgraph") {
      throw new DotError("subgraphs not supported");
    }
    if (peek() && peek()!.kind === "punct" && (peek() as { value: string }).value === "=") {
      next();
      next(); // graph attribute, ignored
      continue;
    }
    const chain: string[] = [first.value];
    while (peek() && peek()!.kind === "arrow") {
      next();
      const target = next();
      if (target.kind !== "id") throw new DotError("expected node after ->");
      chain.push(target.value);
    }
    const attrs = parseAttrs();
    if (peek() && peek()!.kind === "punct" && (peek() as { value: string }).value === ";") {
      next();
    }
    if (chain.length === 1) {
      const node = ensure(chain[0]);
      const rawLabel = attrs.get("label");
      if (rawLabel !== undefined) {
        const split = splitMultiplicity(rawLabel);
        node.label = split.label;
        node.multiplicity = split.multiplicity;
      }
    } else {
      const doubleEnded = attrs.get("dir") === "both";
      chain.forEach(ensure);
      for (let k = 0; k + 1 < chain.length; k += 1) {
        edges.push({ src: chain[k], dst: chain[k + 1], doubleEnded });
      }
    }
  }
  return { nodes: [...nodes.values()], edges };
}

interface Placed extends DiagramNode {
  x: number;
  y: number;
}

const NODE_W = 150;
const NODE_H = 46;
const GAP_X = 60;
const GAP_Y = 24;

/** Longest-path layering; cycles get a bounded fallback. */
export function layoutDiagram(diagram: Diagram): { placed: Placed[]; width: number; height: number } {
  const depth = new Map<string, number>();
  diagram.nodes.forEach((node) => depth.set(node.id, 0));
  for (let pass = 0; pass < diagram.nodes.length + 1; pass += 1) {
    let changed = false;
    for (const edge of diagram.edges) {
      const want = (depth.get(edge.src) ?? 0) + 1;
      if (want > (depth.get(edge.dst) ?? 0) && want <= diagram.nodes.length) {
        depth.set(edge.dst, want);
        changed = true;
      }
    }
    if (!changed) break;
  }
  const layers = new Map<number, DiagramNode[]>();
  for (const node of diagram.nodes) {
    const d = depth.get(node.id) ?? 0;
    const layer = layers.get(d) ?? [];
    layer.push(node);
    layers.set(d, layer);
  }
  const placed: Placed[] = [];
  let maxRows = 1;
  for (const [d, members] of [...layers.entries()].sort((a, b) => a[0] - b[0])) {
    members.forEach((node, row) => {
      placed.push({
        ...node,
        x: d * (NODE_W + GAP_X),
        y: row * (NODE_H + GAP_Y),
      });
    });
    maxRows = Math.max(maxRows, members.length);
  }
  const cols = layers.size || 1;
  return {
    placed,
    width: cols * NODE_W + (cols - 1) * GAP_X,
    height: maxRows * NODE_H + (maxRows - 1) * GAP_Y,
  };
}

const SVG_NS = "http://www.w3.org/2000/svg";

function svgEl<K extends keyof SVGElementTagNameMap>(
  doc: Document,
  tag: K,
  attrs: Record<string, string>,
): SVGElementTagNameMap[K] {
  const el = doc.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    el.setAttribute(key, value);
  }
  return el;
}

/**
 * Draw the diagram into `container`. Unparseable DOT falls back to a raw-text
 * block with a warning banner instead of crashing the view.
 */
export function renderDiagram(container: HTMLElement, dotText: string): boolean {
  const doc = container.ownerDocument;
  container.replaceChildren();
  let diagram: Diagram;
  try {
    diagram = parseDot(dotText);
  } catch (error) {
    const warning = doc.createElement("div");
    warning.className = "diagram-warning";
    warning.textContent = `Diagram could not be drawn (${(error as Error).message}); raw source shown.`;
    const pre = doc.createElement("pre");
    pre.className = "diagram-fallback";
    pre.textContent = dotText;
    container.append(warning, pre);
    return false;
  }

  const { placed, width, height } = layoutDiagram(diagram);
  const pad = 14;
  const svg = svgEl(doc, "svg", {
    viewBox: `${-pad} ${-pad} ${width + 2 * pad} ${height + 2 * pad}`,
    width: String(width + 2 * pad),
    height: String(height + 2 * pad),
    role: "img",
  });
  svg.classList.add("diagram");

  const defs = svgEl(doc, "defs", {});
  const marker = svgEl(doc, "marker", {
    id: "arrow",
    viewBox: "0 0 10 10",
    refX: "9",
    refY: "5",
    markerWidth: "7",
    markerHeight: "7",
    orient: "auto-start-reverse",
  });
  marker.appendChild(svgEl(doc, "path", { d: "M 0 0 L 10 5 L 0 10 z" }));
  defs.appendChild(marker);
  svg.appendChild(defs);

  const byId = new Map(placed.map((p) => [p.id, p]));
  for (const edge of diagram.edges) {
    const from = byId.get(edge.src);
    const to = byId.get(edge.dst);
    if (!from || !to) continue;
    const line = svgEl(doc, "line", {
      x1: String(from.x + NODE_W),
      y1: String(from.y + NODE_H / 2),
      x2: String(to.x),
      y2: String(to.y + NODE_H / 2),
      "marker-end": "url(#arrow)",
    });
    if (edge.doubleEnded) {
      line.setAttribute("marker-start", "url(#arrow)");
      line.setAttribute("data-double-ended", "true");
    }
    line.classList.add("diagram-edge");
    svg.appendChild(line);
  }

  for (const node of placed) {
    const group = svgEl(doc, "g", { "data-node": node.id });
    group.appendChild(
      svgEl(doc, "rect", {
        x: String(node.x),
        y: String(node.y),
        width: String(NODE_W),
        height: String(NODE_H),
        rx: "6",
        class: "diagram-node",
      }),
    );
    const text = svgEl(doc, "text", {
      x: String(node.x + NODE_W / 2),
      y: String(node.y + NODE_H / 2 + 4),
      "text-anchor": "middle",
      class: "diagram-label",
    });
    text.textContent = node.label;
    group.appendChild(text);
    if (node.multiplicity > 1) {
      const badge = svgEl(doc, "g", { "data-badge": `×${node.multiplicity}` });
      badge.appendChild(
        svgEl(doc, "rect", {
          x: String(node.x + NODE_W - 26),
          y: String(node.y - 10),
          width: "32",
          height: "20",
          rx: "10",
          class: "diagram-badge",
        }),
      );
      const badgeText = svgEl(doc, "text", {
        x: String(node.x + NODE_W - 10),
        y: String(node.y + 4),
        "text-anchor": "middle",
        class: "diagram-badge-text",
      });
      badgeText.textContent = `×${node.multiplicity}`;
      badge.appendChild(badgeText);
      group.appendChild(badge);
    }
    svg.appendChild(group);
  }
  container.appendChild(svg);
  return true;
}
