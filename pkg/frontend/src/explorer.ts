/**
 * Exploration pane controller: node expansion and structured updates.
 *
 * Expansion fetches a node's neighbors and merges them into the view;
 * merging is idempotent so double-clicks add nothing twice. A structured
 * update posts to the server and then refetches the neighborhood of every
 * new node, closing the submit -> refetch -> render loop.
 */

import { ApiClient, ApiError } from "./api.js";
import { ViewGraph } from "./viewgraph.js";
import type { UpdatePayload } from "./types.js";

export type ExpandOutcome =
  | { kind: "ok"; added: string[] }
  | { kind: "unknown_node" }
  | { kind: "error"; message: string };

export type UpdateOutcome =
  | { kind: "ok"; payload: UpdatePayload; added: string[] }
  | { kind: "failed"; message: string };

export class Explorer {
  readonly toasts: string[] = [];

  constructor(
    private readonly api: ApiClient,
    readonly view: ViewGraph,
  ) {}

  async loadInitial(limit = 50): Promise<void> {
    const payload = await this.api.graph(limit);
    this.view.merge(payload.nodes, payload.edges);
  }

  async expand(nodeId: string): Promise<ExpandOutcome> {
    try {
      const payload = await this.api.neighbors(nodeId);
      const nodes = [payload.node, ...payload.neighbors.map((n) => n.node)];
      const edges = payload.neighbors.map((n) => n.edge);
      const added = this.view.merge(nodes, edges);
      return { kind: "ok", added };
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        this.toasts.push(`unknown node: ${nodeId}`);
        return { kind: "unknown_node" };
      }
      const message = error instanceof Error ? error.message : String(error);
      this.toasts.push(message);
      return { kind: "error", message };
    }
  }

  async focus(nodeId: string): Promise<void> {
    if (!this.view.nodes.has(nodeId)) {
      await this.expand(nodeId);
    }
    this.view.select(nodeId);
  }

  async submitUpdate(newInfo: unknown): Promise<UpdateOutcome> {
    try {
      const payload = await this.api.update(newInfo);
      this.view.merge(payload.new_nodes, payload.new_edges);
      const added: string[] = payload.new_nodes.map((n) => n.id);
      // refetch each new node's neighborhood so context appears around it
      for (const node of payload.new_nodes) {
        await this.expand(node.id);
      }
      return { kind: "ok", payload, added };
    } catch (error) {
      const message = error instanceof Error ? error.message : String(error);
      this.toasts.push(message);
      return { kind: "failed", message };
    }
  }
}
