/** Turn a server trace into the seven-stage status list the trace panel shows. */

import type { LinkedEntity, StageStatus, StageSummary, TracePayload } from "./types.js";

export const STAGES = [
  "intent",
  "extraction",
  "planning",
  "execution",
  "reasoning",
  "response",
  "update",
] as const;

export function summarizeTrace(trace: TracePayload): StageSummary[] {
  const failedStage = trace.error ? trace.error.stage : null;
  const summary: StageSummary[] = [];
  let afterFailure = false;
  for (const stage of STAGES) {
    let status: StageStatus;
    if (failedStage === stage) {
      status = "failed";
      afterFailure = true;
    } else if (afterFailure) {
      status = "pending";
    } else if (stage === "update") {
      status = "skipped"; // chat runs never reach knowledge integration
    } else if (stage === "planning" && trace.plan === null && trace.tasks.length > 0) {
      status = "skipped"; // free-form route goes straight to execution
    } else {
      const present =
        (stage === "intent" && trace.intent !== null) ||
        (stage === "extraction" && trace.extraction !== null) ||
        (stage === "planning" && trace.plan !== null) ||
        (stage === "execution" && trace.tasks.length > 0) ||
        (stage === "reasoning" && trace.reasoning !== null) ||
        (stage === "response" && trace.response !== null);
      status = present ? "ok" : "pending";
    }
    summary.push({ stage, status });
  }
  return summary;
}

export function linkedEntities(trace: TracePayload): LinkedEntity[] {
  if (!trace.extraction) return [];
  return trace.extraction.entities.map((entry) => ({
    mention: entry.mention,
    node_id: entry.link.node_id,
    score: entry.link.score,
  }));
}
