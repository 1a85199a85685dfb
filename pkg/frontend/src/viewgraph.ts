/**
 * Client-side graph view state.
 *
 * Mirrors the last server payloads: every node and edge id ever shown came
 * from a server response (the client invents no graph data). Merging is
 * idempotent; positions are client-only and computed by the deterministic
 * layout, with existing positions kept so expansion never reshuffles what
 * the user already sees.
 */

import { layoutPositions, type Point } from "./layout.js";
import type { ViewEdge, ViewNode, WireEdge, WireNode } from "./types.js";

function displayName(node: WireNode): string {
  const name = node.props["name"];
  return typeof name === "string" && name.trim() ? name : node.id;
}

export class ViewGraph {
  readonly nodes = new Map<string, ViewNode>();
  readonly edges = new Map<string, ViewEdge>();
  readonly selection = new Set<string>();
  private readonly seenServerIds = new Set<string>();

  constructor(private readonly seed: number = 42) {}

  /** Merge a server payload; returns ids of newly added nodes. */
  merge(nodes: WireNode[], edges: WireEdge[]): string[] {
    const added: string[] = [];
    for (const node of nodes) {
      this.seenServerIds.add(node.id);
      if (!this.nodes.has(node.id)) {
        this.nodes.set(node.id, {
          id: node.id,
          labels: [...node.labels],
          displayName: displayName(node),
          x: 0,
          y: 0,
        });
        added.push(node.id);
      }
    }
    for (const edge of edges) {
      this.seenServerIds.add(edge.id);
      if (
        !this.edges.has(edge.id) &&
        this.nodes.has(edge.src) &&
        this.nodes.has(edge.dst)
      ) {
        this.edges.set(edge.id, {
          id: edge.id,
          src: edge.src,
          dst: edge.dst,
          label: edge.label,
        });
      }
    }
    if (added.length > 0) {
      this.relayout();
    }
    return added;
  }

  private relayout(): void {
    const existing = new Map<string, Point>();
    for (const node of this.nodes.values()) {
      if (node.x !== 0 || node.y !== 0) {
        existing.set(node.id, { x: node.x, y: node.y });
      }
    }
    const positions = layoutPositions(
      [...this.nodes.keys()],
      [...this.edges.values()],
      this.seed,
      existing,
    );
    for (const [id, point] of positions) {
      const node = this.nodes.get(id)!;
      node.x = point.x;
      node.y = point.y;
    }
  }

  select(nodeId: string): void {
    if (this.nodes.has(nodeId)) {
      this.selection.clear();
      this.selection.add(nodeId);
    }
  }

  moveNode(nodeId: string, x: number, y: number): void {
    const node = this.nodes.get(nodeId);
    if (node) {
      node.x = x;
      node.y = y;
    }
  }

  /** Every id in the view came from the server (client invents nothing). */
  allIdsServerBacked(): boolean {
    for (const id of this.nodes.keys()) {
      if (!this.seenServerIds.has(id)) return false;
    }
    for (const id of this.edges.keys()) {
      if (!this.seenServerIds.has(id)) return false;
    }
    return true;
  }

  snapshot(): { nodes: ViewNode[]; edges: ViewEdge[] } {
    return {
      nodes: [...this.nodes.values()].sort((a, b) => a.id.localeCompare(b.id)),
      edges: [...this.edges.values()].sort((a, b) => a.id.localeCompare(b.id)),
    };
  }
}
