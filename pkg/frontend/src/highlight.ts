/**
 * Entity highlighting in answer text: case-insensitive match against the
 * linked entities' display mentions. A documented approximation: the server
 * returns linked node ids, not character spans.
 */

import type { LinkedEntity } from "./types.js";

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function escapeRegExp(text: string): string {
  return text.replace(/[.*+?^${}()|[\]\\]/g, "\\$&");
}

/** Answer text as HTML with linked mentions wrapped in clickable spans. */
export function highlightEntities(text: string, entities: LinkedEntity[]): string {
  const linked = entities.filter((e) => e.node_id !== null && e.mention.trim());
  if (linked.length === 0) return escapeHtml(text);
  // longest mention first so overlapping mentions prefer the longer match
  const ordered = [...linked].sort((a, b) => b.mention.length - a.mention.length);
  const pattern = new RegExp(
    ordered.map((e) => escapeRegExp(e.mention)).join("|"),
    "gi",
  );
  const byMention = new Map(ordered.map((e) => [e.mention.toLowerCase(), e.node_id!]));
  let out = "";
  let last = 0;
  for (const match of text.matchAll(pattern)) {
    const start = match.index ?? 0;
    out += escapeHtml(text.slice(last, start));
    const nodeId = byMention.get(match[0].toLowerCase());
    if (nodeId) {
      out += `<span class="entity" data-node-id="${escapeHtml(nodeId)}">${escapeHtml(match[0])}</span>`;
    } else {
      out += escapeHtml(match[0]);
    }
    last = start + match[0].length;
  }
  out += escapeHtml(text.slice(last));
  return out;
}
