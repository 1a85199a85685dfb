/** Browser bootstrap: wires the stores and renderers to the two-pane page. */

import { ApiClient } from "./api.js";
import { ChatStore } from "./chat.js";
import { Explorer } from "./explorer.js";
import { renderChat, renderGraphSvg, renderToasts } from "./render.js";
import { ViewGraph } from "./viewgraph.js";

declare global {
  interface Window {
    AGRAPH_BASE_URL?: string;
  }
}

function sessionId(): string {
  const key = "agraph-session";
  let sid = sessionStorage.getItem(key);
  if (!sid) {
    sid = `web-${Date.now().toString(36)}-${Math.floor(Math.random() * 1e6).toString(36)}`;
    sessionStorage.setItem(key, sid);
  }
  return sid;
}

export function mount(root: Document): void {
  const baseUrl = (root.defaultView as Window | null)?.AGRAPH_BASE_URL ?? "";
  const api = new ApiClient(baseUrl);
  const chat = new ChatStore(api, sessionId());
  const explorer = new Explorer(api, new ViewGraph(42));

  const chatLog = root.getElementById("chat-log")!;
  const chatInput = root.getElementById("chat-input") as HTMLTextAreaElement;
  const chatSend = root.getElementById("chat-send") as HTMLButtonElement;
  const graphPane = root.getElementById("graph-pane")!;
  const toastArea = root.getElementById("toasts")!;
  const updateForm = root.getElementById("update-form") as HTMLFormElement;

  function redraw(): void {
    chatLog.innerHTML = renderChat(chat.turns);
    chatLog.scrollTop = chatLog.scrollHeight;
    const view = explorer.view.snapshot();
    graphPane.innerHTML = renderGraphSvg(view.nodes, view.edges, explorer.view.selection);
    toastArea.innerHTML = renderToasts(explorer.toasts);
    chatSend.disabled = !chat.canSend(chatInput.value);
  }

  chatInput.addEventListener("input", () => {
    chatSend.disabled = !chat.canSend(chatInput.value);
  });

  async function sendCurrent(): Promise<void> {
    const text = chatInput.value;
    if (!chat.canSend(text)) return;
    chatSend.disabled = true;
    const outcome = await chat.send(text);
    if (outcome.kind === "ok") {
      chatInput.value = "";
      const linked = outcome.entities.filter((e) => e.node_id !== null);
      if (linked.length > 0) {
        await explorer.focus(linked[0].node_id!);
      }
    } else if (outcome.kind === "busy") {
      explorer.toasts.push("session busy; try again in a moment");
    }
    redraw();
  }

  chatSend.addEventListener("click", () => void sendCurrent());
  chatInput.addEventListener("keydown", (event) => {
    if (event.key === "Enter" && !event.shiftKey) {
      event.preventDefault();
      void sendCurrent();
    }
  });

  chatLog.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const nodeId = target.dataset?.nodeId;
    if (nodeId) {
      void explorer.focus(nodeId).then(redraw);
    }
  });

  graphPane.addEventListener("dblclick", (event) => {
    const target = (event.target as HTMLElement).closest("[data-node-id]") as HTMLElement | null;
    const nodeId = target?.dataset?.nodeId;
    if (nodeId) {
      void explorer.expand(nodeId).then(redraw);
    }
  });

  graphPane.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest("[data-node-id]") as HTMLElement | null;
    const nodeId = target?.dataset?.nodeId;
    if (nodeId) {
      explorer.view.select(nodeId);
      redraw();
    }
  });

  updateForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const entity = (root.getElementById("update-entity") as HTMLInputElement).value.trim();
    const type = (root.getElementById("update-type") as HTMLInputElement).value.trim();
    const relation = (root.getElementById("update-relation") as HTMLInputElement).value.trim();
    const target = (root.getElementById("update-target") as HTMLInputElement).value.trim();
    if (!entity || !type) return;
    const newInfo: Record<string, unknown> = { entity, type, properties: {} };
    if (relation && target) {
      newInfo.relations = [{ type: relation, target }];
    }
    void explorer.submitUpdate(newInfo).then(redraw);
  });

  void explorer.loadInitial().then(redraw);
}

if (typeof document !== "undefined" && document.getElementById("chat-log")) {
  mount(document);
}
