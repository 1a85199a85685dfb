/** Thin typed client over the service endpoints; fetch is injectable for tests. */

import type {
  ApiErrorBody,
  ChatPayload,
  GraphPayload,
  NeighborsPayload,
  TaskInfo,
  UpdatePayload,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ApiErrorBody,
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    const body = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, body as ApiErrorBody);
    }
    return body as T;
  }

  health(): Promise<{ status: string; nodes: number; edges: number }> {
    return this.request("/v1/health");
  }

  tasks(): Promise<{ tasks: TaskInfo[] }> {
    return this.request("/v1/tasks");
  }

  chat(sessionId: string, message: string): Promise<ChatPayload> {
    return this.request("/v1/chat", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ session_id: sessionId, message }),
    });
  }

  graph(limit = 100, label?: string): Promise<GraphPayload> {
    const params = new URLSearchParams({ limit: String(limit) });
    if (label) params.set("label", label);
    return this.request(`/v1/graph?${params.toString()}`);
  }

  neighbors(nodeId: string, direction = "both"): Promise<NeighborsPayload> {
    return this.request(
      `/v1/nodes/${encodeURIComponent(nodeId)}/neighbors?direction=${direction}`,
    );
  }

  update(newInfo: unknown): Promise<UpdatePayload> {
    return this.request("/v1/graph/update", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ new_info: newInfo }),
    });
  }
}
