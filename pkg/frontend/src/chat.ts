/**
 * Chat pane state machine.
 *
 * One in-flight request per session: while pending, further sends are
 * rejected client-side; a server 409 (another tab holds the session) keeps
 * the draft so the user can retry. Errors become error turns and the input
 * is preserved. Turn order always matches send order.
 */

import { ApiClient, ApiError } from "./api.js";
import { linkedEntities, summarizeTrace } from "./trace.js";
import type { ChatTurn, LinkedEntity } from "./types.js";

export type SendOutcome =
  | { kind: "ok"; entities: LinkedEntity[] }
  | { kind: "busy" }
  | { kind: "rejected"; reason: string }
  | { kind: "error"; message: string };

export class ChatStore {
  readonly turns: ChatTurn[] = [];
  pending = false;
  draft = "";

  constructor(
    private readonly api: ApiClient,
    private readonly sessionId: string,
  ) {}

  canSend(text: string): boolean {
    return !this.pending && text.trim().length > 0;
  }

  async send(text: string): Promise<SendOutcome> {
    if (!text.trim()) {
      return { kind: "rejected", reason: "empty" };
    }
    if (this.pending) {
      return { kind: "rejected", reason: "pending" };
    }
    this.pending = true;
    this.draft = text;
    this.turns.push({ role: "user", text, traceSummary: [], linkedEntities: [] });
    try {
      const payload = await this.api.chat(this.sessionId, text);
      const entities = linkedEntities(payload.trace);
      this.turns.push({
        role: "assistant",
        text: payload.answer.direct_answer,
        traceSummary: summarizeTrace(payload.trace),
        linkedEntities: entities,
      });
      this.draft = "";
      return { kind: "ok", entities };
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        // the session is busy elsewhere; drop our provisional user turn and
        // keep the draft so a retry re-sends the same text
        this.turns.pop();
        return { kind: "busy" };
      }
      const message = error instanceof Error ? error.message : String(error);
      this.turns.push({
        role: "error",
        text: message,
        traceSummary:
          error instanceof ApiError && error.body.trace
            ? summarizeTrace(error.body.trace)
            : [],
        linkedEntities: [],
      });
      return { kind: "error", message };
    } finally {
      this.pending = false;
    }
  }
}
