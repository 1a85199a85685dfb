"""HTTP facade: chat, graph exploration and knowledge updates.

The JSON contract the browser client consumes. Chat runs the pipeline
under per-session serialization (an overlapping request on the same
session gets a 409); graph reads never change the graph; updates go
through the transactional integration path. Every error body has the
shape {"code", "message"} plus an optional "stage".
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from fastapi import FastAPI, Query
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .graph import EdgeRecord, NodeRecord, UnknownId
from .pipeline import IntegrationFailed, Pipeline, PipelineError, UserQuery

TASKS = [
    {"class": 1, "name": "Relation Judgment",
     "description": "Check whether and how two concepts are related."},
    {"class": 2, "name": "Prerequisite Prediction",
     "description": "List what to learn before tackling a concept."},
    {"class": 3, "name": "Path Searching",
     "description": "Find a step-by-step route between two concepts."},
    {"class": 4, "name": "Concept Clustering",
     "description": "Group related concepts into thematic clusters."},
    {"class": 5, "name": "Subgraph Completion",
     "description": "Suggest likely missing links around chosen concepts."},
    {"class": 6, "name": "Idea Hamster",
     "description": "Brainstorm practical applications grounded in the graph."},
    {"class": 7, "name": "Freestyle NLP Question",
     "description": "Ask anything else; answered with graph context where possible."},
]


@dataclass
class SessionState:
    session_id: str
    history: deque = field(default_factory=lambda: deque(maxlen=5))
    lock: threading.Lock = field(default_factory=threading.Lock)
    created_at: float = field(default_factory=time.time)
    last_used: float = field(default_factory=time.time)


class ChatBody(BaseModel):
    session_id: str
    message: str


class UpdateBody(BaseModel):
    new_info: object = None


def _error(status: int, code: str, message: str, stage: Optional[str] = None, **extra):
    body = {"code": code, "message": message}
    if stage is not None:
        body["stage"] = stage
    body.update(extra)
    return JSONResponse(status_code=status, content=body)


def _node_payload(node: NodeRecord) -> dict:
    return {"id": node.id, "labels": list(node.labels), "props": dict(node.props)}


def _edge_payload(edge: EdgeRecord) -> dict:
    return {
        "id": edge.id, "src": edge.src, "dst": edge.dst,
        "label": edge.label, "props": dict(edge.props),
    }


def _response_payload(response) -> dict:
    return {
        "direct_answer": response.direct_answer,
        "detailed_explanation": response.detailed_explanation,
        "examples": response.examples,
        "caveats": response.caveats,
        "further_exploration": response.further_exploration,
        "trace_ref": response.trace_ref,
    }


def create_app(
    pipeline: Pipeline,
    cors_origin: Optional[str] = None,
    session_window: int = 5,
    session_ttl: float = 3600.0,
) -> FastAPI:
    app = FastAPI(title="agraph", version="0.1.0")
    if cors_origin:
        from fastapi.middleware.cors import CORSMiddleware

        app.add_middleware(
            CORSMiddleware,
            allow_origins=[cors_origin],
            allow_methods=["*"],
            allow_headers=["*"],
        )

    sessions: dict = {}
    sessions_lock = threading.Lock()

    def session_for(session_id: str) -> SessionState:
        now = time.time()
        with sessions_lock:
            for sid in [s for s, state in sessions.items() if now - state.last_used > session_ttl]:
                del sessions[sid]
            state = sessions.get(session_id)
            if state is None:
                state = SessionState(session_id, history=deque(maxlen=session_window))
                sessions[session_id] = state
            state.last_used = now
            return state

    app.state.pipeline = pipeline
    app.state.sessions = sessions

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "graph_version": pipeline.graph.version,
                "nodes": len(pipeline.graph.nodes), "edges": len(pipeline.graph.edges)}

    @app.get("/v1/tasks")
    def tasks():
        return {"tasks": TASKS}

    @app.post("/v1/chat")
    def chat(body: ChatBody):
        if not body.message.strip():
            return _error(400, "empty_query", "message must be nonempty")
        state = session_for(body.session_id)
        if not state.lock.acquire(blocking=False):
            return _error(409, "session_busy", "a request is already running on this session")
        try:
            query = UserQuery(session_id=body.session_id, text=body.message)
            try:
                trace = pipeline.run(query, history=list(state.history))
            except PipelineError as exc:
                payload = exc.trace.to_dict() if exc.trace else None
                return _error(
                    500, "pipeline_error", exc.message, stage=exc.stage, trace=payload
                )
            state.history.append((body.message, trace.response.direct_answer))
            return {"answer": _response_payload(trace.response), "trace": trace.to_dict()}
        finally:
            state.lock.release()

    @app.get("/v1/graph")
    def graph_fetch(limit: int = Query(default=100, ge=0), label: Optional[str] = None):
        graph = pipeline.graph
        node_ids = sorted(graph.nodes)
        if label is not None:
            node_ids = [nid for nid in node_ids if label in graph.nodes[nid].labels]
        chosen = node_ids[:limit]
        chosen_set = set(chosen)
        nodes = [_node_payload(graph.nodes[nid]) for nid in chosen]
        edges = [
            _edge_payload(graph.edges[eid])
            for eid in sorted(graph.edges)
            if graph.edges[eid].src in chosen_set and graph.edges[eid].dst in chosen_set
        ]
        return {"nodes": nodes, "edges": edges}

    @app.get("/v1/nodes/{node_id}/neighbors")
    def neighbors(node_id: str, direction: str = "both", label: Optional[str] = None):
        if direction not in ("out", "in", "both"):
            return _error(400, "bad_direction", f"direction must be out, in or both, got {direction!r}")
        try:
            center = pipeline.graph.node(node_id)
            pairs = pipeline.graph.neighbors(node_id, direction, label)
        except UnknownId:
            return _error(404, "unknown_node", f"no node named {node_id!r}")
        return {
            "node_id": center.id,
            "node": _node_payload(center),
            "neighbors": [
                {"edge": _edge_payload(edge), "node": _node_payload(node)}
                for edge, node in pairs
            ],
        }

    @app.post("/v1/graph/update")
    def update(body: UpdateBody):
        if body.new_info in (None, "", {}):
            return _error(400, "empty_update", "new_info must be nonempty")
        try:
            result = pipeline.integrate(body.new_info)
        except IntegrationFailed as exc:
            return _error(
                422, "integration_failed", str(exc),
                stage="update", failed_index=exc.failed_index,
            )
        except PipelineError as exc:
            return _error(500, "pipeline_error", exc.message, stage=exc.stage)
        return {
            "version": result.version,
            "applied": result.applied,
            "verification_rows": result.verification_rows,
            "new_nodes": [_node_payload(n) for n in result.delta.new_nodes],
            "new_edges": [_edge_payload(e) for e in result.delta.new_edges],
        }

    return app
