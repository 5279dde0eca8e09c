/** Collapsible node-link rendering of the server's tree JSON.
 *
 * The view model is a pure projection of the last fetched payload plus
 * local UI state (collapsed paths, selection); no tree math happens here.
 */

import type { SensitiveSplitEntry, TreeNodeDoc, TreePayload } from "./types.js";

const NODE_W = 170;
const NODE_H = 46;
const GAP_X = 14;
const GAP_Y = 64;

export interface LaidOutNode {
  path: string[];
  node: TreeNodeDoc;
  x: number;
  y: number;
  collapsed: boolean;
  sensitive: boolean;
  parent: string | null;
}

export class TreeViewModel {
  payload: TreePayload;
  collapsed: Set<string>;
  selected: string | null = null;

  constructor(payload: TreePayload) {
    this.payload = payload;
    this.collapsed = new Set();
  }

  /** Replace the server tree (after a commit), keeping compatible UI state. */
  refresh(payload: TreePayload): void {
    this.payload = payload;
    if (this.selected !== null && !this.nodeAt(this.selected.split("/"))) {
      this.selected = null;
    }
  }

  key(path: string[]): string {
    return path.join("/");
  }

  nodeAt(path: string[]): TreeNodeDoc | null {
    let node: TreeNodeDoc = this.payload.tree.root;
    for (const step of path) {
      if (step === "") continue;
      if (node.kind !== "split") return null;
      node = step === "L" ? node.left : node.right;
    }
    return node;
  }

  toggle(path: string[]): void {
    const k = this.key(path);
    if (this.collapsed.has(k)) this.collapsed.delete(k);
    else this.collapsed.add(k);
  }

  select(path: string[] | null): void {
    this.selected = path === null ? null : this.key(path);
  }

  sensitivePaths(): Set<string> {
    return new Set(this.payload.sensitive_splits.map(
      (s: SensitiveSplitEntry) => s.node_path.join("/")));
  }

  /** Depth-layered layout over the visible (non-collapsed) nodes. */
  layout(): LaidOutNode[] {
    const out: LaidOutNode[] = [];
    const sensitive = this.sensitivePaths();
    let cursor = 0;

    const place = (node: TreeNodeDoc, path: string[],
                   parent: string | null): number => {
      const k = this.key(path);
      const collapsed = this.collapsed.has(k);
      const y = path.length * GAP_Y + 10;
      let x: number;
      if (node.kind === "leaf" || collapsed) {
        x = cursor;
        cursor += NODE_W + GAP_X;
      } else {
        const lx = place(node.left, [...path, "L"], k);
        const rx = place(node.right, [...path, "R"], k);
        x = (lx + rx) / 2;
      }
      out.push({ path, node, x, y, collapsed,
                 sensitive: sensitive.has(k), parent });
      return x;
    };
    place(this.payload.tree.root, [], null);
    return out;
  }
}

function nodeLabel(node: TreeNodeDoc): string {
  return node.kind === "leaf" ? `→ ${node.prediction_label}` : node.text;
}

function tooltip(node: TreeNodeDoc): string {
  if (node.kind === "leaf") {
    return `${node.prediction_label}\nsamples: ${node.n_samples}\n` +
      `distribution: [${node.distribution.join(", ")}]`;
  }
  return `${node.text}\nsamples: ${node.n_samples}\n` +
    `left: ≤ / non-member, right: > / member`;
}

export interface TreeViewHandlers {
  onSelect: (path: string[]) => void;
  onToggle: (path: string[]) => void;
}

/** Render the tree into an SVG inside the container. */
export function renderTree(container: HTMLElement, view: TreeViewModel,
                           handlers: TreeViewHandlers): void {
  const nodes = view.layout();
  const byKey = new Map(nodes.map((n) => [view.key(n.path), n]));
  const width = Math.max(...nodes.map((n) => n.x), 0) + NODE_W + 20;
  const height = Math.max(...nodes.map((n) => n.y), 0) + NODE_H + 20;

  const svgNs = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(svgNs, "svg");
  svg.setAttribute("width", String(width));
  svg.setAttribute("height", String(height));
  svg.setAttribute("class", "tree-svg");

  for (const laid of nodes) {
    if (laid.parent === null) continue;
    const parent = byKey.get(laid.parent)!;
    const edge = document.createElementNS(svgNs, "line");
    edge.setAttribute("x1", String(parent.x + NODE_W / 2));
    edge.setAttribute("y1", String(parent.y + NODE_H));
    edge.setAttribute("x2", String(laid.x + NODE_W / 2));
    edge.setAttribute("y2", String(laid.y));
    edge.setAttribute("class", "tree-edge");
    svg.appendChild(edge);
  }

  for (const laid of nodes) {
    const k = view.key(laid.path);
    const group = document.createElementNS(svgNs, "g");
    const classes = ["tree-node", laid.node.kind];
    if (laid.sensitive) classes.push("sensitive");
    if (view.selected === k) classes.push("selected");
    if (laid.collapsed) classes.push("collapsed");
    group.setAttribute("class", classes.join(" "));
    group.setAttribute("data-path", k);
    group.setAttribute("transform", `translate(${laid.x},${laid.y})`);

    const rect = document.createElementNS(svgNs, "rect");
    rect.setAttribute("width", String(NODE_W));
    rect.setAttribute("height", String(NODE_H));
    rect.setAttribute("rx", "6");
    group.appendChild(rect);

    const title = document.createElementNS(svgNs, "title");
    title.textContent = tooltip(laid.node);
    group.appendChild(title);

    const text = document.createElementNS(svgNs, "text");
    text.setAttribute("x", "8");
    text.setAttribute("y", "18");
    text.textContent = truncate(nodeLabel(laid.node), 24);
    group.appendChild(text);

    const count = document.createElementNS(svgNs, "text");
    count.setAttribute("x", "8");
    count.setAttribute("y", "36");
    count.setAttribute("class", "count");
    count.textContent = `${laid.node.n_samples} samples` +
      (laid.collapsed ? " [+]" : "");
    group.appendChild(count);

    group.addEventListener("click", (event) => {
      event.stopPropagation();
      handlers.onSelect(laid.path);
    });
    group.addEventListener("dblclick", (event) => {
      event.stopPropagation();
      if (laid.node.kind === "split") handlers.onToggle(laid.path);
    });
    svg.appendChild(group);
  }

  container.replaceChildren(svg);
}

/** Render the sensitive-split review list; returns flagged node count. */
export function renderSplitList(container: HTMLElement, view: TreeViewModel,
                                onPick: (path: string[]) => void): number {
  const list = document.createElement("ul");
  list.className = "split-list";
  for (const entry of view.payload.sensitive_splits) {
    const item = document.createElement("li");
    item.setAttribute("data-path", entry.node_path.join("/"));
    const button = document.createElement("button");
    button.textContent =
      `${entry.text} — ${entry.n_samples} samples, depth ${entry.depth}`;
    button.addEventListener("click", () => onPick(entry.node_path));
    item.appendChild(button);
    list.appendChild(item);
  }
  const header = document.createElement("h3");
  header.textContent = `Sensitive splits (${view.payload.sensitive_splits.length})`;
  container.replaceChildren(header, list);
  return view.payload.sensitive_splits.length;
}

function truncate(text: string, n: number): string {
  return text.length <= n ? text : text.slice(0, n - 1) + "…";
}
