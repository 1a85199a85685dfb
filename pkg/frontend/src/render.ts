/** Pure HTML renderers for both panes; string-in string-out, testable headless. */

import { highlightEntities } from "./highlight.js";
import type { ChatTurn, StageSummary, ViewEdge, ViewNode } from "./types.js";

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const STATUS_ICON: Record<string, string> = {
  ok: "&#10003;",      // check mark
  failed: "&#10007;",  // cross
  pending: "&#8230;",  // ellipsis
  skipped: "&#8211;",  // dash
};

export function renderTracePanel(summary: StageSummary[]): string {
  const items = summary
    .map(
      (entry) =>
        `<li class="stage stage-${entry.status}" data-stage="${entry.stage}">` +
        `<span class="icon">${STATUS_ICON[entry.status]}</span>` +
        `${escapeHtml(entry.stage)}</li>`,
    )
    .join("");
  return `<ul class="trace-panel">${items}</ul>`;
}

export function renderTurn(turn: ChatTurn): string {
  if (turn.role === "user") {
    return `<div class="turn user"><p>${escapeHtml(turn.text)}</p></div>`;
  }
  if (turn.role === "error") {
    return `<div class="turn error"><p>${escapeHtml(turn.text)}</p>${
      turn.traceSummary.length ? renderTracePanel(turn.traceSummary) : ""
    }</div>`;
  }
  const body = highlightEntities(turn.text, turn.linkedEntities);
  return (
    `<div class="turn assistant"><p>${body}</p>` +
    renderTracePanel(turn.traceSummary) +
    `</div>`
  );
}

export function renderChat(turns: ChatTurn[]): string {
  return turns.map(renderTurn).join("\n");
}

export function renderGraphSvg(nodes: ViewNode[], edges: ViewEdge[], selection: Set<string>): string {
  const byId = new Map(nodes.map((n) => [n.id, n]));
  const edgeLines = edges
    .filter((e) => byId.has(e.src) && byId.has(e.dst))
    .map((e) => {
      const a = byId.get(e.src)!;
      const b = byId.get(e.dst)!;
      return (
        `<line class="edge" data-edge-id="${escapeHtml(e.id)}" ` +
        `x1="${a.x}" y1="${a.y}" x2="${b.x}" y2="${b.y}">` +
        `<title>${escapeHtml(e.label)}</title></line>`
      );
    })
    .join("");
  const nodeCircles = nodes
    .map((n) => {
      const selected = selection.has(n.id) ? " selected" : "";
      return (
        `<g class="node${selected}" data-node-id="${escapeHtml(n.id)}" ` +
        `transform="translate(${n.x},${n.y})">` +
        `<circle r="14"></circle>` +
        `<text dy="28">${escapeHtml(n.displayName)}</text></g>`
      );
    })
    .join("");
  return `<svg viewBox="0 0 800 600">${edgeLines}${nodeCircles}</svg>`;
}

export function renderToasts(toasts: string[]): string {
  return toasts
    .slice(-3)
    .map((t) => `<div class="toast">${escapeHtml(t)}</div>`)
    .join("");
}
