import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ChatStore } from "../src/chat.js";
import { renderChat, renderTracePanel } from "../src/render.js";
import { summarizeTrace } from "../src/trace.js";
import { CHAT_GOLDEN, StubServer } from "./stub_server.js";

const QUESTION = "Is word embedding a prerequisite for understanding BERT?";

function makeStore(server = new StubServer()) {
  const api = new ApiClient("", server.fetch);
  return { store: new ChatStore(api, "s1"), server };
}

describe("chat pane", () => {
  it("renders the pipeline golden's trace stages", async () => {
    const { store } = makeStore();
    const outcome = await store.send(QUESTION);
    expect(outcome.kind).toBe("ok");
    expect(store.turns).toHaveLength(2);
    const assistant = store.turns[1];
    expect(assistant.role).toBe("assistant");
    expect(assistant.text).toBe(CHAT_GOLDEN.answer.direct_answer);

    const stages = assistant.traceSummary.map((s) => `${s.stage}:${s.status}`);
    expect(stages).toEqual([
      "intent:ok",
      "extraction:ok",
      "planning:ok",
      "execution:ok",
      "reasoning:ok",
      "response:ok",
      "update:skipped",
    ]);

    const html = renderChat(store.turns);
    for (const stage of ["intent", "extraction", "planning", "execution", "reasoning", "response"]) {
      expect(html).toContain(`data-stage="${stage}"`);
    }
    // linked entities become clickable spans targeting graph nodes
    expect(html).toContain('data-node-id="word_embeddings"');
    expect(html).toContain('data-node-id="bert"');
  });

  it("keeps chat history in send order", async () => {
    const { store } = makeStore();
    await store.send(QUESTION);
    await store.send(QUESTION);
    expect(store.turns.map((t) => t.role)).toEqual([
      "user", "assistant", "user", "assistant",
    ]);
  });

  it("rejects empty input and concurrent sends client-side", async () => {
    const { store } = makeStore();
    expect(store.canSend("   ")).toBe(false);
    const first = await store.send("  ");
    expect(first.kind).toBe("rejected");
    store.pending = true;
    expect(store.canSend(QUESTION)).toBe(false);
    const second = await store.send(QUESTION);
    expect(second.kind).toBe("rejected");
  });

  it("handles a 409 by preserving the draft for retry", async () => {
    const { store, server } = makeStore();
    server.busySessions.add("s1");
    const outcome = await store.send(QUESTION);
    expect(outcome.kind).toBe("busy");
    expect(store.turns).toHaveLength(0);
    expect(store.draft).toBe(QUESTION);
    // server frees up: the retry with the same draft succeeds
    server.busySessions.delete("s1");
    const retry = await store.send(store.draft);
    expect(retry.kind).toBe("ok");
    expect(store.turns).toHaveLength(2);
  });

  it("turns a failed-stage trace into a failed/pending panel", () => {
    const failed = {
      ...CHAT_GOLDEN.trace,
      reasoning: null,
      response: null,
      error: { stage: "reasoning", message: "boom" },
    };
    const summary = summarizeTrace(failed);
    const byStage = Object.fromEntries(summary.map((s) => [s.stage, s.status]));
    expect(byStage["execution"]).toBe("ok");
    expect(byStage["reasoning"]).toBe("failed");
    expect(byStage["response"]).toBe("pending");
    expect(renderTracePanel(summary)).toContain("stage-failed");
  });
});
