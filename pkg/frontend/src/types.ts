/** Wire types for the service endpoints plus client-side view state. */

// ---------------------------------------------------------------------------
// Wire payloads (mirror the JSON the server emits)
// ---------------------------------------------------------------------------

export interface WireNode {
  id: string;
  labels: string[];
  props: Record<string, string | number | boolean>;
}

export interface WireEdge {
  id: string;
  src: string;
  dst: string;
  label: string;
  props: Record<string, string | number | boolean>;
}

export interface GraphPayload {
  nodes: WireNode[];
  edges: WireEdge[];
}

export interface NeighborsPayload {
  node_id: string;
  node: WireNode;
  neighbors: Array<{ edge: WireEdge; node: WireNode }>;
}

export interface LinkedEntity {
  mention: string;
  node_id: string | null;
  score: number;
}

export interface TracePayload {
  trace_id: string;
  intent: { task_class: number; confidence: number } | null;
  extraction: { entities: Array<{ mention: string; link: { node_id: string | null; score: number } }> } | null;
  plan: { tasks: Array<{ id: number; description: string }> } | null;
  tasks: Array<{ task_id: number; mode: string; queries: string[] }>;
  reasoning: { conclusion: string } | null;
  response: { direct_answer: string } | null;
  llm_calls: Array<{ tag: string }>;
  error: { stage: string; message: string } | null;
}

export interface ChatPayload {
  answer: {
    direct_answer: string;
    detailed_explanation: string;
    caveats: string[];
    further_exploration: string[];
  };
  trace: TracePayload;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  stage?: string;
  trace?: TracePayload;
  failed_index?: number;
}

export interface UpdatePayload {
  version: number;
  applied: boolean;
  verification_rows: number[];
  new_nodes: WireNode[];
  new_edges: WireEdge[];
}

export interface TaskInfo {
  class: number;
  name: string;
  description: string;
}

// ---------------------------------------------------------------------------
// View state
// ---------------------------------------------------------------------------

export type StageStatus = "ok" | "failed" | "pending" | "skipped";

export interface StageSummary {
  stage: string;
  status: StageStatus;
}

export interface ChatTurn {
  role: "user" | "assistant" | "error";
  text: string;
  traceSummary: StageSummary[];
  linkedEntities: LinkedEntity[];
}

export interface ViewNode {
  id: string;
  labels: string[];
  displayName: string;
  x: number;
  y: number;
}

export interface ViewEdge {
  id: string;
  src: string;
  dst: string;
  label: string;
}
