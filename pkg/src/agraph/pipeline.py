"""Seven-stage agent pipeline over the graph.

A user query flows through intent classification, concept extraction and
linking, task planning, per-task query execution with bounded refinement,
reasoning over the collected rows, and response generation; knowledge
updates go through a transactional integration path with verification
queries and rollback.

Stage order and every tie-break are deterministic, so with a scripted
provider and the hash embedder a whole run is a pure function of
(graph, query, script): two runs produce identical traces modulo
timestamps.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from . import gql, taskops
from .embedding import Embedder, EmbeddingCache, LinkResult, link, link_relation
from .graph import CreateEdge, CreateNode, GraphError, KnowledgeGraph
from .llm import (
    ChatRequest,
    Field,
    GatewayError,
    LLMGateway,
    SchemaViolation,
    TraceEntry,
)

TASK_CLASS_NAMES = {
    1: "Relation Judgment",
    2: "Prerequisite Prediction",
    3: "Path Searching",
    4: "Concept Clustering",
    5: "Subgraph Completion",
    6: "Idea Hamster",
    7: "Freestyle NLP Question",
}

FREE_FORM_CLASS = 7
EMPTY_EVIDENCE_SENTINEL = "no supporting rows found"
INSUFFICIENT_EVIDENCE_CAVEAT = "insufficient graph evidence"


class PipelineError(Exception):
    def __init__(self, stage: str, message: str, trace: Optional["PipelineTrace"] = None):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.message = message
        self.trace = trace


class TaskFailed(Exception):
    """A task exhausted its refinement budget; carries every attempt."""

    def __init__(self, task_id: int, attempts: List[Tuple[Optional[str], str]]):
        lines = "; ".join(err for _, err in attempts)
        super().__init__(f"task {task_id} failed after {len(attempts)} attempts: {lines}")
        self.task_id = task_id
        self.attempts = attempts


class PlanError(Exception):
    pass


class CyclicPlan(PlanError):
    def __init__(self, cycle: List[int]):
        super().__init__(f"task plan contains a cycle among ids {cycle}")
        self.cycle = cycle


class DanglingDependency(PlanError):
    def __init__(self, task_id: int, dep: int):
        super().__init__(f"task {task_id} depends on unknown task {dep}")
        self.task_id = task_id
        self.dep = dep


class IntegrationFailed(Exception):
    def __init__(self, failed_index: int, message: str):
        super().__init__(f"verification query {failed_index} failed: {message}")
        self.failed_index = failed_index


@dataclass
class PipelineConfig:
    query_mode: str = "hybrid"  # deterministic | llm | hybrid
    confidence_threshold: float = 60.0
    refine_budget: int = 3
    retry_limit: int = 3
    link_threshold: float = 0.80
    link_k: int = 5
    session_window: int = 5
    prereq_relation: str = "prerequisite_of"
    temperature: float = 0.0
    max_tokens: int = 1024

    def __post_init__(self):
        if self.query_mode not in ("deterministic", "llm", "hybrid"):
            raise ValueError(f"unknown query mode {self.query_mode!r}")


# -- stage data -----------------------------------------------------------------


@dataclass
class UserQuery:
    session_id: str
    text: str
    received_at: float = field(default_factory=time.time)


@dataclass
class IntentClassification:
    task_class: int
    confidence: float
    key_concepts: List[str]
    reasoning: str
    raw_class: int  # class before any confidence downgrade

    @property
    def task_name(self) -> str:
        return TASK_CLASS_NAMES[self.task_class]


@dataclass
class ConceptExtraction:
    task_class: int
    entities: List[Tuple[str, LinkResult]]
    relations: List[Tuple[str, str, str]]  # (type, source mention, target mention)
    domain: Optional[str] = None

    def linked_ids(self) -> List[Optional[str]]:
        return [result.node_id for _, result in self.entities]


@dataclass
class TaskNode:
    id: int
    description: str
    dependencies: List[int] = field(default_factory=list)


@dataclass
class TaskPlan:
    tasks: List[TaskNode]
    execution_order: List[int]
    goal_analysis: str = ""


@dataclass
class TaskExecution:
    task_id: int
    mode: str  # deterministic | llm
    queries: List[str]  # every attempted query or op descriptor, in order
    result: Optional[gql.QueryResult]
    attempts: int


@dataclass
class ReasoningOutput:
    key_observations: List[str]
    inferred_relationships: List[str]
    logical_inferences: List[str]
    contextual_interpretation: str
    confidence: float
    conclusion: str


@dataclass
class AgentResponse:
    direct_answer: str
    detailed_explanation: str
    examples: List[str]
    caveats: List[str]
    further_exploration: List[str]
    trace_ref: str


@dataclass
class UpdateDelta:
    new_nodes: list
    new_edges: list
    integration_queries: List[gql.GraphQuery]
    verification_queries: List[gql.GraphQuery]


@dataclass
class IntegrationReport:
    delta: UpdateDelta
    version: int
    applied: bool
    verification_rows: List[int]


@dataclass
class PipelineTrace:
    trace_id: str
    query: UserQuery
    intent: Optional[IntentClassification] = None
    extraction: Optional[ConceptExtraction] = None
    plan: Optional[TaskPlan] = None
    executions: List[TaskExecution] = field(default_factory=list)
    reasoning: Optional[ReasoningOutput] = None
    response: Optional[AgentResponse] = None
    llm_calls: List[TraceEntry] = field(default_factory=list)
    error: Optional[Tuple[str, str]] = None  # (stage, message)
    timings: Dict[str, float] = field(default_factory=dict)

    def to_dict(self, include_timings: bool = True) -> dict:
        def link_dict(result: LinkResult) -> dict:
            return {
                "mention": result.mention,
                "node_id": result.node_id,
                "score": result.score,
                "candidates": [list(c) for c in result.candidates],
            }

        doc: dict = {
            "trace_id": self.trace_id,
            "query": {"session_id": self.query.session_id, "text": self.query.text},
            "intent": None,
            "extraction": None,
            "plan": None,
            "tasks": [],
            "reasoning": None,
            "response": None,
            "llm_calls": [
                {
                    "tag": e.tag,
                    "system": e.system,
                    "user": e.user,
                    "reply": e.reply,
                    "attempt": e.attempt,
                }
                for e in self.llm_calls
            ],
            "error": {"stage": self.error[0], "message": self.error[1]} if self.error else None,
        }
        if include_timings:
            doc["query"]["received_at"] = self.query.received_at
            doc["timings"] = dict(self.timings)
        if self.intent:
            doc["intent"] = {
                "task_class": self.intent.task_class,
                "raw_class": self.intent.raw_class,
                "confidence": self.intent.confidence,
                "key_concepts": list(self.intent.key_concepts),
                "reasoning": self.intent.reasoning,
            }
        if self.extraction:
            doc["extraction"] = {
                "task_class": self.extraction.task_class,
                "entities": [
                    {"mention": m, "link": link_dict(r)} for m, r in self.extraction.entities
                ],
                "relations": [list(r) for r in self.extraction.relations],
                "domain": self.extraction.domain,
            }
        if self.plan:
            doc["plan"] = {
                "goal_analysis": self.plan.goal_analysis,
                "tasks": [
                    {"id": t.id, "description": t.description, "dependencies": list(t.dependencies)}
                    for t in self.plan.tasks
                ],
                "execution_order": list(self.plan.execution_order),
            }
        for execution in self.executions:
            entry = {
                "task_id": execution.task_id,
                "mode": execution.mode,
                "queries": list(execution.queries),
                "attempts": execution.attempts,
                "result": None,
            }
            if execution.result is not None:
                entry["result"] = {
                    "columns": list(execution.result.columns),
                    "rows": [list(row) for row in execution.result.rows],
                    "stats": {
                        "nodes_created": execution.result.stats.nodes_created,
                        "edges_created": execution.result.stats.edges_created,
                        "rows_returned": execution.result.stats.rows_returned,
                    },
                }
            doc["tasks"].append(entry)
        if self.reasoning:
            doc["reasoning"] = {
                "key_observations": list(self.reasoning.key_observations),
                "inferred_relationships": list(self.reasoning.inferred_relationships),
                "logical_inferences": list(self.reasoning.logical_inferences),
                "contextual_interpretation": self.reasoning.contextual_interpretation,
                "confidence": self.reasoning.confidence,
                "conclusion": self.reasoning.conclusion,
            }
        if self.response:
            doc["response"] = {
                "direct_answer": self.response.direct_answer,
                "detailed_explanation": self.response.detailed_explanation,
                "examples": list(self.response.examples),
                "caveats": list(self.response.caveats),
                "further_exploration": list(self.response.further_exploration),
                "trace_ref": self.response.trace_ref,
            }
        return doc

    def to_json(self, include_timings: bool = True) -> str:
        return json.dumps(
            self.to_dict(include_timings), ensure_ascii=False, sort_keys=True,
            separators=(",", ":"),
        )


def canonical_trace_json(trace: PipelineTrace) -> str:
    """Timestamp-free canonical serialization for determinism checks."""
    return trace.to_json(include_timings=False)


# -- prompt plumbing ---------------------------------------------------------------


def schema_digest(graph: KnowledgeGraph) -> dict:
    """Labels, relation types and per-label property keys, for prompts."""
    if graph.schema_hint is not None:
        return {
            "nodes": sorted(graph.schema_hint.labels),
            "relationships": sorted(graph.schema_hint.relation_types),
            "properties": {},
        }
    labels = set()
    rel_types = set()
    props: Dict[str, set] = {}
    for node in graph.nodes.values():
        for label in node.labels:
            labels.add(label)
            props.setdefault(label, set()).update(node.props)
    for edge in graph.edges.values():
        rel_types.add(edge.label)
    return {
        "nodes": sorted(labels),
        "relationships": sorted(rel_types),
        "properties": {label: sorted(keys) for label, keys in sorted(props.items())},
    }


def _json_compact(value) -> str:
    return json.dumps(value, ensure_ascii=False, sort_keys=True, separators=(", ", ": "))


def history_suffix(history: Sequence[Tuple[str, str]], window: int) -> str:
    if not history:
        return ""
    recent = list(history)[-window:]
    lines = ["", "Recent conversation:"]
    for question, answer in recent:
        lines.append(f"Q: {question}")
        lines.append(f"A: {answer}")
    return "\n".join(lines)


def refine_prompt(previous_user: str, query_text: Optional[str], problem: str) -> str:
    attempt = f"\n\nPrevious query attempt:\n{query_text}" if query_text else "\n\nPrevious attempt"
    return (
        previous_user
        + attempt
        + f"\nProblem: {problem}"
        + "\nProvide a corrected query plan in the same JSON format."
    )


def _task_type_slot(task_class: int) -> str:
    return f"{task_class} ({TASK_CLASS_NAMES[task_class]})"


def results_payload(executions: Sequence[TaskExecution], plan: Optional[TaskPlan]) -> list:
    descriptions = {}
    if plan:
        descriptions = {t.id: t.description for t in plan.tasks}
    payload = []
    for execution in executions:
        entry = {
            "task_id": execution.task_id,
            "description": descriptions.get(execution.task_id, ""),
            "columns": list(execution.result.columns) if execution.result else [],
            "rows": [list(r) for r in execution.result.rows] if execution.result else [],
        }
        payload.append(entry)
    return payload


# -- the pipeline ---------------------------------------------------------------------


class Pipeline:
    """Binds a graph, a gateway and an embedder into the full agent loop."""

    def __init__(
        self,
        graph: KnowledgeGraph,
        gateway: LLMGateway,
        embedder: Embedder,
        config: Optional[PipelineConfig] = None,
        stage_gateways: Optional[Dict[str, LLMGateway]] = None,
    ):
        self.graph = graph
        self.gateway = gateway
        self.embedder = embedder
        self.config = config or PipelineConfig()
        self.cache = EmbeddingCache()
        self._stage_gateways = stage_gateways or {}

    def _gateway(self, stage: str) -> LLMGateway:
        return self._stage_gateways.get(stage, self.gateway)

    def _request(self, stage: str, user: str) -> ChatRequest:
        return ChatRequest(
            system=f"You are the {stage} agent of a knowledge-graph assistant.",
            user=user,
            temperature=self.config.temperature,
            max_tokens=self.config.max_tokens,
            tag=stage,
        )

    # -- stage 1: intent ---------------------------------------------------------

    INTENT_FIELDS = (
        Field("key_concepts", "string_list"),
        Field("task_classification", "integer", min_value=1, max_value=7),
        Field("confidence", "number", min_value=0, max_value=100),
        Field("reasoning", "string", required=False),
    )

    def classify_intent(
        self,
        query: UserQuery,
        history: Sequence[Tuple[str, str]] = (),
        sink: Optional[List[TraceEntry]] = None,
    ) -> IntentClassification:
        if not query.text.strip():
            raise PipelineError("intent", "empty query")
        gateway = self._gateway("intent")
        user = gateway.render_template("intent", {"query": query.text})
        user += history_suffix(history, self.config.session_window)
        reply = gateway.complete_structured(
            self._request("intent", user), self.INTENT_FIELDS, sink
        )
        raw_class = reply.value["task_classification"]
        confidence = float(reply.value["confidence"])
        task_class = raw_class
        if confidence < self.config.confidence_threshold:
            task_class = FREE_FORM_CLASS
        return IntentClassification(
            task_class=task_class,
            confidence=confidence,
            key_concepts=list(reply.value.get("key_concepts", [])),
            reasoning=str(reply.value.get("reasoning", "")),
            raw_class=raw_class,
        )

    # -- stage 2: extraction --------------------------------------------------------

    _CLASS1_FIELDS = (
        Field("concept_1", "string"),
        Field("concept_2", "string"),
        Field("relation", "string", required=False),
        Field("relation_description", "string", required=False),
    )
    _CLASS2_FIELDS = (
        Field("target_concept", "string"),
        Field("domain", "string", required=False),
    )
    _GENERIC_FIELDS = (
        Field("entities", "string_list"),
        Field("relations", "list", required=False),
        Field("domain", "string", required=False),
    )

    def extract_concepts(
        self,
        query: UserQuery,
        intent: IntentClassification,
        sink: Optional[List[TraceEntry]] = None,
    ) -> ConceptExtraction:
        gateway = self._gateway("extraction")
        task_class = intent.task_class
        user = gateway.render_template(
            "extraction", {"query": query.text, "task_type": _task_type_slot(task_class)}
        )
        if task_class == 1:
            fields = self._CLASS1_FIELDS
        elif task_class == 2:
            fields = self._CLASS2_FIELDS
        else:
            fields = self._GENERIC_FIELDS
        reply = gateway.complete_structured(self._request("extraction", user), fields, sink)
        value = reply.value

        mentions: List[str] = []
        relations: List[Tuple[str, str, str]] = []
        domain: Optional[str] = None
        if task_class == 1:
            mentions = [value.get("concept_1", ""), value.get("concept_2", "")]
            mentions = [m for m in mentions if m.strip()]
            if len(mentions) < 2:
                raise PipelineError("extraction", "class 1 requires two concepts")
            relation = str(value.get("relation", "") or "relates_to")
            relations = [(relation, mentions[0], mentions[1])]
        elif task_class == 2:
            target = str(value.get("target_concept", ""))
            if not target.strip():
                raise PipelineError("extraction", "class 2 requires a target concept")
            mentions = [target]
            domain = value.get("domain") or None
        else:
            mentions = [m for m in value.get("entities", []) if m.strip()]
            domain = value.get("domain") or None
            for item in value.get("relations", []) or []:
                if isinstance(item, dict) and {"type", "source", "target"} <= set(item):
                    relations.append((str(item["type"]), str(item["source"]), str(item["target"])))
            if task_class == 3 and len(mentions) < 2:
                raise PipelineError("extraction", "class 3 requires a start and a goal concept")
            if task_class in (5, 6) and not mentions:
                raise PipelineError(
                    "extraction", f"class {task_class} requires at least one concept"
                )
            if task_class == 4 and not mentions and not domain:
                raise PipelineError("extraction", "class 4 requires a concept or a domain")

        entities = [
            (
                mention,
                link(
                    mention,
                    self.graph,
                    self.embedder,
                    k=self.config.link_k,
                    threshold=self.config.link_threshold,
                    cache=self.cache,
                ),
            )
            for mention in mentions
        ]
        hint = self.graph.schema_hint
        if hint and hint.relation_types:
            normalized = []
            for rel_type, src, dst in relations:
                linked_rel = link_relation(
                    rel_type, hint.relation_types, self.embedder, self.config.link_threshold
                )
                normalized.append((linked_rel or rel_type, src, dst))
            relations = normalized
        return ConceptExtraction(
            task_class=task_class, entities=entities, relations=relations, domain=domain
        )

    # -- stage 3: planning -------------------------------------------------------------

    _PLAN_FIELDS = (
        Field("goal_analysis", "string", required=False),
        Field("tasks", "list", nonempty=True),
        Field("execution_strategy", "string", required=False),
    )

    def plan_tasks(
        self,
        query: UserQuery,
        intent: IntentClassification,
        extraction: ConceptExtraction,
        sink: Optional[List[TraceEntry]] = None,
    ) -> TaskPlan:
        gateway = self._gateway("planning")
        user = gateway.render_template(
            "planning",
            {
                "user_intent": query.text,
                "extracted_concepts": _json_compact([m for m, _ in extraction.entities]),
                "task_type": _task_type_slot(intent.task_class),
            },
        )
        reply = gateway.complete_structured(self._request("planning", user), self._PLAN_FIELDS, sink)
        tasks = []
        for item in reply.value["tasks"]:
            if not isinstance(item, dict) or "id" not in item or "description" not in item:
                raise PipelineError("planning", f"malformed task entry: {item!r}")
            deps = item.get("dependencies", [])
            if not isinstance(deps, list) or any(not isinstance(d, int) for d in deps):
                raise PipelineError("planning", f"malformed dependencies on task {item['id']!r}")
            tasks.append(TaskNode(int(item["id"]), str(item["description"]), list(deps)))
        order = topological_order(tasks)
        return TaskPlan(
            tasks=tasks, execution_order=order,
            goal_analysis=str(reply.value.get("goal_analysis", "")),
        )

    # -- stage 4: task execution ----------------------------------------------------------

    def execute_task(
        self,
        task: TaskNode,
        intent: IntentClassification,
        extraction: ConceptExtraction,
        context: Sequence[TaskExecution] = (),
        sink: Optional[List[TraceEntry]] = None,
    ) -> TaskExecution:
        mode = self._mode_for_class(intent.task_class)
        if mode == "deterministic":
            return self._execute_deterministic(task, intent.task_class, extraction)
        return self._execute_llm(task, extraction, context, sink)

    def _mode_for_class(self, task_class: int) -> str:
        if self.config.query_mode == "llm":
            return "llm"
        if self.config.query_mode == "deterministic":
            return "deterministic"
        return "deterministic" if task_class <= 5 else "llm"

    def _linked_or_fail(self, task_id: int, extraction: ConceptExtraction, count: int) -> List[str]:
        ids = []
        for mention, result in extraction.entities:
            if result.node_id is None:
                raise TaskFailed(task_id, [(None, f"unlinked concept {mention!r}")])
            ids.append(result.node_id)
            if len(ids) == count:
                break
        if len(ids) < count:
            raise TaskFailed(task_id, [(None, f"need {count} linked concepts, have {len(ids)}")])
        return ids

    def _execute_deterministic(
        self, task: TaskNode, task_class: int, extraction: ConceptExtraction
    ) -> TaskExecution:
        g = self.graph
        try:
            if task_class == 1:
                a, b = self._linked_or_fail(task.id, extraction, 2)
                verdict = taskops.judge_relation(g, a, b)
                op = f"taskops.judge_relation({a!r}, {b!r})"
                if verdict.direct_edges:
                    result = gql.QueryResult(
                        columns=["subject", "relation", "object"],
                        rows=[(e.src, e.label, e.dst) for e in verdict.direct_edges],
                    )
                elif verdict.connecting_paths:
                    result = gql.QueryResult(
                        columns=["path"],
                        rows=[(" -> ".join(p.nodes),) for p in verdict.connecting_paths],
                    )
                else:
                    result = gql.QueryResult(columns=["subject", "relation", "object"], rows=[])
            elif task_class == 2:
                (target,) = self._linked_or_fail(task.id, extraction, 1)
                prereq = taskops.prerequisites(g, target, self.config.prereq_relation)
                op = f"taskops.prerequisites({target!r})"
                result = gql.QueryResult(
                    columns=["concept", "depth"],
                    rows=list(zip(prereq.nodes, prereq.depths)),
                )
            elif task_class == 3:
                start, goal = self._linked_or_fail(task.id, extraction, 2)
                op = f"taskops.find_path({start!r}, {goal!r})"
                try:
                    path = taskops.find_path(g, start, goal, treat_undirected=True)
                    rows = [(i, node) for i, node in enumerate(path.nodes)]
                except taskops.NoPath:
                    rows = []
                result = gql.QueryResult(columns=["step", "concept"], rows=rows)
            elif task_class == 4:
                seed = extraction.domain
                op = f"taskops.cluster({seed!r})"
                try:
                    clusters = taskops.cluster(g, seed)
                    rows = [
                        (index, member)
                        for index, members in enumerate(clusters.clusters)
                        for member in members
                    ]
                except taskops.EmptySelection:
                    rows = []
                result = gql.QueryResult(columns=["cluster", "member"], rows=rows)
            elif task_class == 5:
                focus = self._linked_or_fail(task.id, extraction, 1)
                all_linked = [nid for nid in extraction.linked_ids() if nid]
                op = f"taskops.complete_subgraph({all_linked!r})"
                candidates = taskops.complete_subgraph(g, all_linked, k=self.config.link_k)
                result = gql.QueryResult(
                    columns=["src", "dst", "score"],
                    rows=[(c.src, c.dst, c.score) for c in candidates],
                )
            else:  # classes 6 and 7 under deterministic query mode
                linked = [nid for nid in extraction.linked_ids() if nid]
                if not linked:
                    raise TaskFailed(task.id, [(None, "no linked concepts for context digest")])
                op = f"taskops.idea_context({linked!r}, radius=1)"
                digest = taskops.idea_context(g, linked, radius=1)
                result = gql.QueryResult(columns=["context"], rows=[(digest,)])
        except TaskFailed:
            raise
        except (taskops.TaskOpError, GraphError) as exc:
            raise TaskFailed(task.id, [(None, str(exc))]) from exc
        return TaskExecution(
            task_id=task.id, mode="deterministic", queries=[op], result=result, attempts=1
        )

    _QUERYGEN_FIELDS = (
        Field("cypher_query", "string", nonempty=True),
        Field("query_objective", "string", required=False),
        Field("refinement_strategy", "string", required=False),
    )

    def _execute_llm(
        self,
        task: TaskNode,
        extraction: ConceptExtraction,
        context: Sequence[TaskExecution],
        sink: Optional[List[TraceEntry]],
    ) -> TaskExecution:
        gateway = self._gateway("query_generation")
        concepts = [
            {"mention": mention, "node_id": result.node_id}
            for mention, result in extraction.entities
        ]
        task_slot = task.description
        if context:
            task_slot += "\n\nCompleted prior tasks:\n" + _json_compact(
                results_payload(context, None)
            )
        user = gateway.render_template(
            "query_generation",
            {
                "task": task_slot,
                "concepts": _json_compact(concepts),
                "schema": _json_compact(schema_digest(self.graph)),
            },
        )
        attempts: List[Tuple[Optional[str], str]] = []
        queries: List[str] = []
        empty_refined = False
        for attempt in range(1, self.config.refine_budget + 1):
            try:
                reply = gateway.complete_structured(
                    self._request("query_generation", user), self._QUERYGEN_FIELDS, sink
                )
            except SchemaViolation as exc:
                attempts.append((None, f"no valid query plan: {exc}"))
                raise TaskFailed(task.id, attempts) from exc
            query_text = reply.value["cypher_query"].strip()
            queries.append(query_text)
            try:
                parsed = gql.parse(query_text)
                result = gql.execute(parsed, self.graph)
            except (
                gql.QuerySyntaxError,
                gql.UnsupportedSyntax,
                gql.UndeclaredVariable,
                gql.TypeMismatch,
                gql.ExecutionError,
                ValueError,
            ) as exc:
                problem = f"{type(exc).__name__}: {exc}"
                attempts.append((query_text, problem))
                user = refine_prompt(user, query_text, problem)
                continue
            if not result.rows and result.stats.nodes_created == 0 and not empty_refined:
                # one refinement round for an empty result, then accept it
                if attempt < self.config.refine_budget:
                    empty_refined = True
                    problem = "the query returned no rows; consider broadening it"
                    attempts.append((query_text, problem))
                    user = refine_prompt(user, query_text, problem)
                    continue
            return TaskExecution(
                task_id=task.id, mode="llm", queries=queries, result=result, attempts=attempt
            )
        raise TaskFailed(task.id, attempts)

    # -- stage 5: reasoning ------------------------------------------------------------

    _REASONING_FIELDS = (
        Field("key_observations", "string_list"),
        Field("inferred_relationships", "string_list", required=False),
        Field("logical_inferences", "string_list", required=False),
        Field("contextual_interpretation", "string", required=False),
        Field("confidence_assessment", "number", min_value=0, max_value=100),
        Field("conclusion", "string"),
    )

    def reason(
        self,
        query: UserQuery,
        intent: IntentClassification,
        executions: Sequence[TaskExecution],
        plan: Optional[TaskPlan] = None,
        history: Sequence[Tuple[str, str]] = (),
        sink: Optional[List[TraceEntry]] = None,
    ) -> ReasoningOutput:
        if not executions:
            raise PipelineError("reasoning", "no task was attempted")
        gateway = self._gateway("reasoning")
        user = gateway.render_template(
            "reasoning",
            {
                "query_results": _json_compact(results_payload(executions, plan)),
                "user_query": query.text,
                "task_type": _task_type_slot(intent.task_class),
            },
        )
        user += history_suffix(history, self.config.session_window)
        reply = gateway.complete_structured(
            self._request("reasoning", user), self._REASONING_FIELDS, sink
        )
        value = reply.value
        observations = list(value["key_observations"])
        any_rows = any(e.result and e.result.rows for e in executions)
        if not any_rows and EMPTY_EVIDENCE_SENTINEL not in observations:
            observations.append(EMPTY_EVIDENCE_SENTINEL)
        conclusion = str(value["conclusion"])
        if any_rows and not conclusion.strip():
            raise PipelineError("reasoning", "empty conclusion despite supporting rows")
        return ReasoningOutput(
            key_observations=observations,
            inferred_relationships=list(value.get("inferred_relationships", [])),
            logical_inferences=list(value.get("logical_inferences", [])),
            contextual_interpretation=str(value.get("contextual_interpretation", "")),
            confidence=float(value["confidence_assessment"]),
            conclusion=conclusion,
        )

    # -- stage 6: response --------------------------------------------------------------

    _RESPONSE_FIELDS = (
        Field("direct_answer", "string", nonempty=True),
        Field("detailed_explanation", "string", required=False),
        Field("examples", "string_list", required=False),
        Field("caveats", "string_list", required=False),
        Field("further_exploration", "string_list", required=False),
    )

    def respond(
        self,
        query: UserQuery,
        intent: IntentClassification,
        reasoning: ReasoningOutput,
        trace_ref: str,
        sink: Optional[List[TraceEntry]] = None,
    ) -> AgentResponse:
        gateway = self._gateway("response")
        reasoning_payload = {
            "key_observations": reasoning.key_observations,
            "inferred_relationships": reasoning.inferred_relationships,
            "logical_inferences": reasoning.logical_inferences,
            "conclusion": reasoning.conclusion,
            "confidence": reasoning.confidence,
        }
        user = gateway.render_template(
            "response",
            {
                "user_query": query.text,
                "intent": _task_type_slot(intent.task_class),
                "reasoning_results": _json_compact(reasoning_payload),
                "task_type": _task_type_slot(intent.task_class),
            },
        )
        reply = gateway.complete_structured(
            self._request("response", user), self._RESPONSE_FIELDS, sink
        )
        value = reply.value
        caveats = list(value.get("caveats", []))
        if not reasoning.conclusion.strip() and INSUFFICIENT_EVIDENCE_CAVEAT not in caveats:
            caveats.append(INSUFFICIENT_EVIDENCE_CAVEAT)
        return AgentResponse(
            direct_answer=value["direct_answer"],
            detailed_explanation=str(value.get("detailed_explanation", "")),
            examples=list(value.get("examples", [])),
            caveats=caveats,
            further_exploration=list(value.get("further_exploration", [])),
            trace_ref=trace_ref,
        )

    # -- knowledge integration ------------------------------------------------------------

    _INTEGRATION_FIELDS = (
        Field("cypher_queries", "list"),
        Field("verification_queries", "list", required=False),
        Field("analysis", "string", required=False),
        Field("conflict_resolution", "string", required=False),
        Field("rollback_plan", "string", required=False),
    )

    def integrate(
        self,
        new_info: Union[str, dict, None],
        sink: Optional[List[TraceEntry]] = None,
    ) -> IntegrationReport:
        """Apply an update transactionally: stage, verify, then commit once.

        Integration queries run in order against a staged copy with
        duplicate-skipping (re-ingesting an existing node or edge is a
        no-op); every verification query must return at least one row.
        Any failure leaves the live graph exactly at its pre-call snapshot.
        """
        if new_info is None or new_info == "" or new_info == {}:
            empty = UpdateDelta([], [], [], [])
            return IntegrationReport(empty, self.graph.version, False, [])
        snapshot = self.graph.snapshot()
        gateway = self._gateway("update")
        info_slot = new_info if isinstance(new_info, str) else _json_compact(new_info)
        user = gateway.render_template(
            "integration",
            {"new_info": info_slot, "graph_schema": _json_compact(schema_digest(self.graph))},
        )
        reply = gateway.complete_structured(
            self._request("update", user), self._INTEGRATION_FIELDS, sink
        )
        integration_texts = [
            item["query"] for item in reply.value["cypher_queries"]
            if isinstance(item, dict) and item.get("query")
        ]
        verification_texts = [
            item["query"] for item in reply.value.get("verification_queries", []) or []
            if isinstance(item, dict) and item.get("query")
        ]
        if not integration_texts:
            empty = UpdateDelta([], [], [], [])
            return IntegrationReport(empty, self.graph.version, False, [])
        if not verification_texts:
            raise PipelineError(
                "update", "integration queries provided without verification queries"
            )

        try:
            integration_queries = [gql.parse(text) for text in integration_texts]
            verification_queries = [gql.parse(text) for text in verification_texts]
        except (gql.QuerySyntaxError, gql.UnsupportedSyntax, gql.UndeclaredVariable) as exc:
            raise PipelineError("update", f"unparseable integration plan: {exc}")

        staged = self.graph.clone()
        try:
            for query in integration_queries:
                gql.execute(query, staged, duplicate_policy="skip")
        except (gql.ExecutionError, gql.TypeMismatch, GraphError) as exc:
            self._rollback(snapshot)
            raise PipelineError("update", f"integration query failed: {exc}")

        verification_rows = []
        for index, query in enumerate(verification_queries):
            try:
                outcome = gql.execute(query, staged)
            except (gql.ExecutionError, gql.TypeMismatch) as exc:
                self._rollback(snapshot)
                raise IntegrationFailed(index, str(exc))
            verification_rows.append(len(outcome.rows))
            if not outcome.rows:
                self._rollback(snapshot)
                raise IntegrationFailed(index, "verification query returned no rows")

        new_node_ids = sorted(set(staged.nodes) - set(self.graph.nodes))
        new_edge_ids = sorted(set(staged.edges) - set(self.graph.edges))
        batch: list = [
            CreateNode(nid, staged.nodes[nid].labels, staged.nodes[nid].props)
            for nid in new_node_ids
        ]
        batch += [
            CreateEdge(
                eid,
                staged.edges[eid].src,
                staged.edges[eid].dst,
                staged.edges[eid].label,
                staged.edges[eid].props,
            )
            for eid in new_edge_ids
        ]
        applied = False
        version = self.graph.version
        if batch:
            try:
                version = self.graph.mutate(batch)
                applied = True
            except GraphError as exc:  # pragma: no cover - staged state already validated
                self._rollback(snapshot)
                raise PipelineError("update", f"commit failed: {exc}")
        delta = UpdateDelta(
            new_nodes=[staged.nodes[nid] for nid in new_node_ids],
            new_edges=[staged.edges[eid] for eid in new_edge_ids],
            integration_queries=integration_queries,
            verification_queries=verification_queries,
        )
        return IntegrationReport(delta, version, applied, verification_rows)

    def _rollback(self, snapshot) -> None:
        # staging means the live graph is only touched on commit; restore is
        # for the commit path and for defense in depth
        if self.graph.version != snapshot.taken_at_version:
            self.graph.restore(snapshot)

    # -- full run -----------------------------------------------------------------------

    def run(
        self,
        query: UserQuery,
        history: Sequence[Tuple[str, str]] = (),
    ) -> PipelineTrace:
        trace_id = hashlib.sha256(
            f"{query.session_id}\n{query.text}".encode("utf-8")
        ).hexdigest()[:16]
        trace = PipelineTrace(trace_id=trace_id, query=query)
        sink = trace.llm_calls
        timer = time.perf_counter

        def stage(name: str):
            trace.timings[name] = timer()

        def stage_done(name: str):
            trace.timings[name] = timer() - trace.timings[name]

        def fail(stage_name: str, exc: Exception):
            """Mark the failed stage on the trace and re-raise appropriately."""
            message = getattr(exc, "message", None) or str(exc)
            trace.error = (stage_name, message)
            if isinstance(exc, PipelineError):
                exc.trace = trace
                raise exc
            raise PipelineError(stage_name, message, trace) from exc

        try:
            stage("intent")
            trace.intent = self.classify_intent(query, history, sink)
            stage_done("intent")
        except (PipelineError, GatewayError) as exc:
            fail("intent", exc)

        try:
            stage("extraction")
            trace.extraction = self.extract_concepts(query, trace.intent, sink)
            stage_done("extraction")
        except (PipelineError, GatewayError) as exc:
            fail("extraction", exc)

        task_class = trace.intent.task_class
        if task_class == FREE_FORM_CLASS:
            tasks = [TaskNode(1, query.text, [])]
            order = [1]
        else:
            try:
                stage("planning")
                trace.plan = self.plan_tasks(query, trace.intent, trace.extraction, sink)
                stage_done("planning")
            except (PipelineError, GatewayError, PlanError) as exc:
                fail("planning", exc)
            tasks = trace.plan.tasks
            order = trace.plan.execution_order

        by_id = {t.id: t for t in tasks}
        try:
            stage("execution")
            for task_id in order:
                execution = self.execute_task(
                    by_id[task_id], trace.intent, trace.extraction, trace.executions, sink
                )
                trace.executions.append(execution)
            stage_done("execution")
        except (TaskFailed, PipelineError, GatewayError) as exc:
            fail("execution", exc)

        try:
            stage("reasoning")
            trace.reasoning = self.reason(
                query, trace.intent, trace.executions, trace.plan, history, sink
            )
            stage_done("reasoning")
        except (PipelineError, GatewayError) as exc:
            fail("reasoning", exc)

        try:
            stage("response")
            trace.response = self.respond(query, trace.intent, trace.reasoning, trace_id, sink)
            stage_done("response")
        except (PipelineError, GatewayError) as exc:
            fail("response", exc)

        return trace


def topological_order(tasks: Sequence[TaskNode]) -> List[int]:
    """Kahn's algorithm; the ready set is consumed in ascending-id order."""
    import heapq

    ids = [t.id for t in tasks]
    if len(set(ids)) != len(ids):
        raise PlanError(f"duplicate task ids in plan: {sorted(ids)}")
    known = set(ids)
    dependents: Dict[int, List[int]] = {i: [] for i in ids}
    in_degree: Dict[int, int] = {i: 0 for i in ids}
    for task in tasks:
        for dep in task.dependencies:
            if dep not in known:
                raise DanglingDependency(task.id, dep)
            dependents[dep].append(task.id)
            in_degree[task.id] += 1
    ready = [i for i in ids if in_degree[i] == 0]
    heapq.heapify(ready)
    order: List[int] = []
    while ready:
        current = heapq.heappop(ready)
        order.append(current)
        for nxt in dependents[current]:
            in_degree[nxt] -= 1
            if in_degree[nxt] == 0:
                heapq.heappush(ready, nxt)
    if len(order) != len(ids):
        raise CyclicPlan(sorted(set(ids) - set(order)))
    return order
