"""Evaluation harness: dataset generation, pipeline sweeps, and metrics.

Records live in append-only JSONL files; a human review pass appends status
lines rather than mutating records, and only approved records enter a
sweep. Scoring reports accuracy, per-class precision/recall/F1, macro-F1
over the classes present in the gold set (micro-F1 printed alongside, which
equals accuracy for single-label classification), and the execution success
rate: the fraction of queries that ran to completion with a nonempty answer.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from .llm import ChatRequest, LLMGateway, SchemaViolation, TraceEntry
from .pipeline import PipelineError, PipelineTrace

N_CLASSES = 7

# Published headline row (display-only comparison for reports)
REFERENCE_ROW = ("gpt-4o published reference", 0.9512, 0.9467, 0.9045)


class JoinError(Exception):
    pass


@dataclass
class EvalRecord:
    id: str
    query: str
    gold_class: int
    domain: str = "NLP"
    source: str = "generated"  # generated | manual
    review_status: str = "pending"  # pending | approved | rejected

    def __post_init__(self):
        if not 1 <= self.gold_class <= N_CLASSES:
            raise ValueError(f"gold_class must be 1..{N_CLASSES}, got {self.gold_class}")
        if self.review_status not in ("pending", "approved", "rejected"):
            raise ValueError(f"bad review status {self.review_status!r}")


@dataclass
class SystemVerdict:
    record_id: str
    predicted_class: int
    executed_ok: bool
    output_nonempty: bool
    trace_ref: str = ""

    def __post_init__(self):
        if not self.executed_ok:
            # a failed run cannot have produced valid output
            self.output_nonempty = False


@dataclass
class MetricsReport:
    accuracy: float
    macro_f1: float
    micro_f1: float
    per_class: Dict[int, Dict[str, float]]
    execution_success_rate: float
    n: int
    confusion: List[List[int]]  # 7x7, rows = gold, columns = predicted


# -- query generation --------------------------------------------------------------


_NUMBERED_LINE = re.compile(r"^\s*\d+\s*[.)]\s*(.+?)\s*$")


def generate_queries(
    task_class: int,
    count: int,
    gateway: LLMGateway,
    start_index: int = 1,
    sink: Optional[List[TraceEntry]] = None,
) -> List[EvalRecord]:
    """Generate candidate eval queries for one task class (all pending review)."""
    if not 1 <= task_class <= N_CLASSES:
        raise ValueError(f"task class must be 1..{N_CLASSES}")
    user = gateway.render_template(f"querygen_{task_class}", {"count": str(count)})
    request = ChatRequest(
        system="You are an evaluation dataset designer.", user=user, tag="querygen"
    )
    reply = gateway.complete(request, sink)
    questions = []
    for line in reply.splitlines():
        match = _NUMBERED_LINE.match(line)
        if match:
            text = match.group(1).strip().strip('"').strip()
            if text:
                questions.append(text)
    if not questions:
        raise SchemaViolation(
            "reply contained no numbered questions", [(user, reply, "unparseable list")]
        )
    seen = set()
    records = []
    index = start_index
    for question in questions:
        if question in seen:
            continue
        seen.add(question)
        records.append(
            EvalRecord(id=f"c{task_class}-{index:04d}", query=question, gold_class=task_class)
        )
        index += 1
    return records


# -- record files (append-only JSONL) ------------------------------------------------


def save_records(records: Sequence[EvalRecord], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps({
                "type": "record",
                "id": record.id,
                "query": record.query,
                "gold_class": record.gold_class,
                "domain": record.domain,
                "source": record.source,
                "review_status": record.review_status,
            }, ensure_ascii=False) + "\n")


def append_review(path: Union[str, Path], record_id: str, status: str) -> None:
    """Record a review decision as a new line; the original line is untouched."""
    if status not in ("pending", "approved", "rejected"):
        raise ValueError(f"bad review status {status!r}")
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps({"type": "review", "id": record_id, "review_status": status}) + "\n")


def load_records(path: Union[str, Path]) -> List[EvalRecord]:
    """Load records, folding in review lines (the last status per id wins)."""
    records: Dict[str, EvalRecord] = {}
    order: List[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            kind = obj.get("type", "record")
            if kind == "record":
                record = EvalRecord(
                    id=obj["id"],
                    query=obj["query"],
                    gold_class=obj["gold_class"],
                    domain=obj.get("domain", "NLP"),
                    source=obj.get("source", "generated"),
                    review_status=obj.get("review_status", "pending"),
                )
                if record.id not in records:
                    order.append(record.id)
                records[record.id] = record
            elif kind == "review":
                if obj["id"] not in records:
                    raise JoinError(f"line {line_no}: review for unknown record {obj['id']!r}")
                records[obj["id"]].review_status = obj["review_status"]
            else:
                raise ValueError(f"line {line_no}: unknown line type {kind!r}")
    return [records[rid] for rid in order]


def save_verdicts(verdicts: Sequence[SystemVerdict], path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for verdict in verdicts:
            fh.write(json.dumps({
                "record_id": verdict.record_id,
                "predicted_class": verdict.predicted_class,
                "executed_ok": verdict.executed_ok,
                "output_nonempty": verdict.output_nonempty,
                "trace_ref": verdict.trace_ref,
            }) + "\n")


def load_verdicts(path: Union[str, Path]) -> List[SystemVerdict]:
    verdicts = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                obj = json.loads(line)
                verdicts.append(SystemVerdict(**obj))
    return verdicts


# -- the sweep -------------------------------------------------------------------------


def run_eval(
    records: Sequence[EvalRecord],
    run_pipeline: Callable[[EvalRecord], PipelineTrace],
) -> List[SystemVerdict]:
    """Run every approved record through the system; failures become verdicts.

    ``run_pipeline`` gets one record and returns its trace (or raises a
    pipeline error carrying a partial trace). A record-level failure is
    recorded as executed_ok=False, never aborting the sweep.
    """
    for record in records:
        if record.review_status != "approved":
            raise ValueError(
                f"record {record.id!r} has review status {record.review_status!r}; "
                "only approved records may be scored"
            )
    verdicts = []
    for record in records:
        trace: Optional[PipelineTrace] = None
        executed_ok = True
        try:
            trace = run_pipeline(record)
            executed_ok = trace.error is None
        except PipelineError as exc:
            trace = exc.trace
            executed_ok = False
        except Exception:  # noqa: BLE001 - a sweep must never abort
            executed_ok = False
        predicted = 7
        if trace is not None and trace.intent is not None:
            predicted = trace.intent.task_class
        answer = ""
        if trace is not None and trace.response is not None:
            answer = trace.response.direct_answer
        verdicts.append(
            SystemVerdict(
                record_id=record.id,
                predicted_class=predicted,
                executed_ok=executed_ok,
                output_nonempty=executed_ok and bool(answer.strip()),
                trace_ref=trace.trace_id if trace is not None else "",
            )
        )
    return verdicts


# -- metrics ----------------------------------------------------------------------------


def score(verdicts: Sequence[SystemVerdict], records: Sequence[EvalRecord]) -> MetricsReport:
    """Confusion-matrix metrics over joined (verdict, record) pairs."""
    by_id = {record.id: record for record in records}
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=int)
    exec_success = 0
    for verdict in verdicts:
        record = by_id.get(verdict.record_id)
        if record is None:
            raise JoinError(f"verdict for unknown record {verdict.record_id!r}")
        confusion[record.gold_class - 1, verdict.predicted_class - 1] += 1
        if verdict.executed_ok and verdict.output_nonempty:
            exec_success += 1
    n = int(confusion.sum())
    if n == 0:
        return MetricsReport(0.0, 0.0, 0.0, {}, 0.0, 0, confusion.tolist())

    accuracy = float(np.trace(confusion)) / n
    per_class: Dict[int, Dict[str, float]] = {}
    f1_present = []
    for cls in range(1, N_CLASSES + 1):
        row = int(confusion[cls - 1].sum())  # gold count
        col = int(confusion[:, cls - 1].sum())  # predicted count
        hit = int(confusion[cls - 1, cls - 1])
        precision = hit / col if col else 0.0
        recall = hit / row if row else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[cls] = {
            "precision": precision, "recall": recall, "f1": f1, "support": float(row),
        }
        if row > 0:
            f1_present.append(f1)
    macro_f1 = float(np.mean(f1_present)) if f1_present else 0.0
    return MetricsReport(
        accuracy=accuracy,
        macro_f1=macro_f1,
        micro_f1=accuracy,  # single-label multiclass: micro-F1 equals accuracy
        per_class=per_class,
        execution_success_rate=exec_success / n,
        n=n,
        confusion=confusion.tolist(),
    )


# -- rendering -----------------------------------------------------------------------------


def metrics_to_dict(metrics: MetricsReport) -> dict:
    return {
        "accuracy": metrics.accuracy,
        "macro_f1": metrics.macro_f1,
        "micro_f1": metrics.micro_f1,
        "per_class": {
            str(cls): dict(values) for cls, values in sorted(metrics.per_class.items())
        },
        "execution_success_rate": metrics.execution_success_rate,
        "n": metrics.n,
        "confusion": metrics.confusion,
    }


def metrics_from_dict(doc: dict) -> MetricsReport:
    return MetricsReport(
        accuracy=doc["accuracy"],
        macro_f1=doc["macro_f1"],
        micro_f1=doc["micro_f1"],
        per_class={int(cls): dict(v) for cls, v in doc["per_class"].items()},
        execution_success_rate=doc["execution_success_rate"],
        n=doc["n"],
        confusion=[list(row) for row in doc["confusion"]],
    )


def report(
    metrics: MetricsReport,
    format: str = "text",
    label: str = "this system",
    reference: Optional[tuple] = REFERENCE_ROW,
) -> str:
    """Render metrics as a stable text table or JSON document."""
    if format == "json":
        return json.dumps(metrics_to_dict(metrics), indent=2, sort_keys=True)
    if format != "text":
        raise ValueError(f"unknown report format {format!r}")
    lines = []
    width = max(len(label), len(reference[0]) if reference else 0, len("Model")) + 2
    header = f"{'Model':<{width}}{'Acc.':>8}{'F1':>8}  {'Exec. Success':>13}"
    lines.append(header)
    lines.append("-" * len(header))
    lines.append(
        f"{label:<{width}}{metrics.accuracy:>8.4f}{metrics.macro_f1:>8.4f}  "
        f"{metrics.execution_success_rate:>13.4f}"
    )
    if reference is not None:
        name, acc, f1, exec_rate = reference
        lines.append(f"{name:<{width}}{acc:>8.4f}{f1:>8.4f}  {exec_rate:>13.4f}")
    lines.append("")
    lines.append(f"n = {metrics.n}")
    lines.append(f"macro-F1 (classes present in gold) = {metrics.macro_f1:.4f}")
    lines.append(f"micro-F1 (equals accuracy)         = {metrics.micro_f1:.4f}")
    lines.append("")
    lines.append("per-class  precision  recall      f1  support")
    for cls, values in sorted(metrics.per_class.items()):
        lines.append(
            f"{cls:>9}  {values['precision']:>9.4f}  {values['recall']:>6.4f}"
            f"  {values['f1']:>6.4f}  {int(values['support']):>7}"
        )
    return "\n".join(lines) + "\n"
