"""Embedded property-graph store.

Nodes carry labels and scalar properties, edges are typed and directed.
Mutations are applied as all-or-nothing batches with a monotonically
increasing version counter; snapshots capture the full graph state and can
be restored atomically. Graphs round-trip through a line-oriented JSON
interchange format with deterministic ordering, so two equal graphs always
export byte-identical files.

Concurrency contract: any number of concurrent readers, one writer at a
time. Committed state lives in a single immutable tuple that is swapped
atomically on commit, so a reader never observes a half-applied batch.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from io import StringIO
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Optional, Sequence, Union

Scalar = Union[str, int, float, bool]

FORMAT_NAME = "agraph"
FORMAT_VERSION = 1


class GraphError(Exception):
    """Base class for graph-store errors."""


class DuplicateId(GraphError):
    pass


class UnknownId(GraphError):
    pass


class DanglingEndpoint(GraphError):
    pass


class InvalidRecord(GraphError):
    pass


class LineageMismatch(GraphError):
    pass


class ParseError(GraphError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class IntegrityError(GraphError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def slug(text: str) -> str:
    """Normalize a name into a stable identifier.

    Case-fold, collapse runs of whitespace, then join with underscores.
    This single rule is shared by node ids, entity-link normalization and
    derived ids in the query engine.
    """
    parts = text.casefold().split()
    return "_".join(parts)


def _check_props(props: Mapping[str, Scalar]) -> dict:
    out = {}
    for name, value in props.items():
        if not isinstance(name, str) or not name:
            raise InvalidRecord(f"property name must be a nonempty string, got {name!r}")
        # bool is checked before int: isinstance(True, int) is True in Python
        if isinstance(value, bool):
            out[name] = value
        elif isinstance(value, (str, int, float)):
            out[name] = value
        else:
            raise InvalidRecord(
                f"property {name!r} has unsupported value kind {type(value).__name__}; "
                "only string, integer, float and boolean are allowed"
            )
    return out


@dataclass(frozen=True)
class NodeRecord:
    id: str
    labels: tuple
    props: dict = field(default_factory=dict)

    def to_line_obj(self) -> dict:
        return {
            "type": "node",
            "id": self.id,
            "labels": list(self.labels),
            "props": dict(sorted(self.props.items())),
        }


@dataclass(frozen=True)
class EdgeRecord:
    id: str
    src: str
    dst: str
    label: str
    props: dict = field(default_factory=dict)

    def to_line_obj(self) -> dict:
        return {
            "type": "edge",
            "id": self.id,
            "src": self.src,
            "dst": self.dst,
            "label": self.label,
            "props": dict(sorted(self.props.items())),
        }


# -- mutation instructions ----------------------------------------------------


@dataclass(frozen=True)
class CreateNode:
    id: str
    labels: Sequence[str]
    props: Mapping[str, Scalar] = field(default_factory=dict)


@dataclass(frozen=True)
class CreateEdge:
    id: str
    src: str
    dst: str
    label: str
    props: Mapping[str, Scalar] = field(default_factory=dict)


@dataclass(frozen=True)
class DeleteNode:
    id: str


@dataclass(frozen=True)
class DeleteEdge:
    id: str


Instruction = Union[CreateNode, CreateEdge, DeleteNode, DeleteEdge]


@dataclass
class SchemaHint:
    labels: list = field(default_factory=list)
    relation_types: list = field(default_factory=list)


class GraphSnapshot:
    """Immutable capture of a graph's full state.

    Internally the state is held as serialized interchange bytes, which makes
    the snapshot trivially frozen and freely shareable across threads.
    """

    def __init__(self, payload: bytes, taken_at_version: int, lineage: str):
        self._payload = payload
        self.taken_at_version = taken_at_version
        self.lineage = lineage

    @property
    def graph(self) -> "KnowledgeGraph":
        """Materialize a fresh graph equal to the captured one."""
        return import_graph(StringIO(self._payload.decode("utf-8")))

    def payload_bytes(self) -> bytes:
        return self._payload


class KnowledgeGraph:
    """In-process property graph with versioned, atomic mutation."""

    def __init__(self, schema_hint: Optional[SchemaHint] = None):
        self._state: tuple = ({}, {})  # (nodes by id, edges by id)
        self._version = 0
        self._graph_id = uuid.uuid4().hex
        self._write_lock = threading.RLock()
        self.schema_hint = schema_hint

    # -- read side -------------------------------------------------------

    @property
    def nodes(self) -> dict:
        return self._state[0]

    @property
    def edges(self) -> dict:
        return self._state[1]

    @property
    def version(self) -> int:
        return self._version

    @property
    def graph_id(self) -> str:
        return self._graph_id

    def node(self, node_id: str) -> NodeRecord:
        key = slug(node_id)
        nodes = self._state[0]
        if key not in nodes:
            raise UnknownId(f"unknown node id {key!r}")
        return nodes[key]

    def has_node(self, node_id: str) -> bool:
        return slug(node_id) in self._state[0]

    def __eq__(self, other) -> bool:
        # Equality is over node/edge content only; version and identity are
        # bookkeeping, and dict == already ignores insertion order.
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self._state[0] == other._state[0] and self._state[1] == other._state[1]

    __hash__ = None

    def __repr__(self) -> str:
        nodes, edges = self._state
        return f"KnowledgeGraph(nodes={len(nodes)}, edges={len(edges)}, version={self._version})"

    def neighbors(
        self,
        node_id: str,
        direction: str = "both",
        label_filter: Optional[str] = None,
    ) -> list:
        """Adjacent (edge, node) pairs of ``node_id``, ordered by edge id.

        ``direction`` is one of ``out``, ``in``, ``both``. A self-loop appears
        exactly once under ``both``.
        """
        if direction not in ("out", "in", "both"):
            raise ValueError(f"direction must be out, in or both, got {direction!r}")
        key = slug(node_id)
        nodes, edges = self._state
        if key not in nodes:
            raise UnknownId(f"unknown node id {key!r}")
        result = []
        for edge_id in sorted(edges):
            edge = edges[edge_id]
            if label_filter is not None and edge.label != label_filter:
                continue
            if direction in ("out", "both") and edge.src == key:
                result.append((edge, nodes[edge.dst]))
            elif direction in ("in", "both") and edge.dst == key:
                result.append((edge, nodes[edge.src]))
        return result

    # -- write side ------------------------------------------------------

    def mutate(self, batch: Sequence[Instruction]) -> int:
        """Apply a batch of instructions atomically; returns the new version.

        Instructions resolve sequentially: an edge may reference a node
        created earlier in the same batch. Deleting a node cascades to its
        incident edges. Any error leaves the graph exactly as it was.
        """
        if not batch:
            raise ValueError("mutation batch must be nonempty")
        with self._write_lock:
            nodes = dict(self._state[0])
            edges = dict(self._state[1])
            for instr in batch:
                self._apply(instr, nodes, edges)
            self._state = (nodes, edges)
            self._version += 1
            return self._version

    @staticmethod
    def _apply(instr: Instruction, nodes: dict, edges: dict) -> None:
        if isinstance(instr, CreateNode):
            node_id = slug(instr.id)
            if not node_id:
                raise InvalidRecord("node id must be nonempty")
            if node_id in nodes:
                raise DuplicateId(f"node id {node_id!r} already exists")
            labels = tuple(instr.labels)
            if not labels or any(not lbl for lbl in labels):
                raise InvalidRecord(f"node {node_id!r} needs at least one nonempty label")
            nodes[node_id] = NodeRecord(node_id, labels, _check_props(instr.props))
        elif isinstance(instr, CreateEdge):
            if not instr.id:
                raise InvalidRecord("edge id must be nonempty")
            if instr.id in edges:
                raise DuplicateId(f"edge id {instr.id!r} already exists")
            src, dst = slug(instr.src), slug(instr.dst)
            if src not in nodes:
                raise DanglingEndpoint(f"edge {instr.id!r} references missing node {src!r}")
            if dst not in nodes:
                raise DanglingEndpoint(f"edge {instr.id!r} references missing node {dst!r}")
            if not instr.label:
                raise InvalidRecord(f"edge {instr.id!r} needs a nonempty label")
            edges[instr.id] = EdgeRecord(instr.id, src, dst, instr.label, _check_props(instr.props))
        elif isinstance(instr, DeleteNode):
            node_id = slug(instr.id)
            if node_id not in nodes:
                raise UnknownId(f"cannot delete unknown node {node_id!r}")
            del nodes[node_id]
            for edge_id in [eid for eid, e in edges.items() if e.src == node_id or e.dst == node_id]:
                del edges[edge_id]
        elif isinstance(instr, DeleteEdge):
            if instr.id not in edges:
                raise UnknownId(f"cannot delete unknown edge {instr.id!r}")
            del edges[instr.id]
        else:
            raise TypeError(f"unknown instruction {instr!r}")

    def snapshot(self) -> GraphSnapshot:
        state = self._state
        version = self._version
        payload = "".join(_export_lines(state[0], state[1])).encode("utf-8")
        return GraphSnapshot(payload, version, self._graph_id)

    def restore(self, snap: GraphSnapshot) -> int:
        """Reset the graph to a snapshot's state; bumps the version."""
        if snap.lineage != self._graph_id:
            raise LineageMismatch("snapshot was taken from a different graph")
        restored = snap.graph
        with self._write_lock:
            self._state = (dict(restored.nodes), dict(restored.edges))
            self._version += 1
            return self._version

    def clone(self) -> "KnowledgeGraph":
        """Independent copy sharing no mutable state (fresh identity)."""
        other = KnowledgeGraph(schema_hint=self.schema_hint)
        other._state = (dict(self._state[0]), dict(self._state[1]))
        return other


# -- interchange format --------------------------------------------------------


def _canonical_line(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _export_lines(nodes: dict, edges: dict) -> Iterator[str]:
    header = {"type": "header", "format": FORMAT_NAME, "version": FORMAT_VERSION}
    yield _canonical_line(header) + "\n"
    for node_id in sorted(nodes):
        yield _canonical_line(nodes[node_id].to_line_obj()) + "\n"
    for edge_id in sorted(edges):
        yield _canonical_line(edges[edge_id].to_line_obj()) + "\n"


def export_graph(graph: KnowledgeGraph, sink: Union[str, Path, IO[str]]) -> None:
    """Write the graph to ``sink`` in the deterministic interchange format."""
    lines = _export_lines(graph.nodes, graph.edges)
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8") as fh:
            fh.writelines(lines)
    else:
        sink.writelines(lines)


def export_bytes(graph: KnowledgeGraph) -> bytes:
    buf = StringIO()
    export_graph(graph, buf)
    return buf.getvalue().encode("utf-8")


def import_graph(source: Union[str, Path, IO[str], Iterable[str]]) -> KnowledgeGraph:
    """Read a graph from an interchange file, path or iterable of lines."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return _import_lines(fh)
    return _import_lines(source)


def _import_lines(lines: Iterable[str]) -> KnowledgeGraph:
    node_instrs = []
    edge_instrs = []
    edge_lines = {}
    seen_nodes = set()
    seen_edges = set()
    header_seen = False
    line_no = 0
    for line_no, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(line_no, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict) or "type" not in obj:
            raise ParseError(line_no, "each line must be a JSON object with a 'type' field")
        kind = obj["type"]
        if not header_seen:
            if kind != "header":
                raise ParseError(line_no, "first line must be the header record")
            if obj.get("format") != FORMAT_NAME or obj.get("version") != FORMAT_VERSION:
                raise ParseError(line_no, f"unsupported format {obj.get('format')!r} v{obj.get('version')!r}")
            header_seen = True
            continue
        if kind == "node":
            try:
                node_id = slug(obj["id"])
                if node_id in seen_nodes:
                    raise ParseError(line_no, f"duplicate node id {node_id!r}")
                seen_nodes.add(node_id)
                node_instrs.append(CreateNode(obj["id"], obj["labels"], obj.get("props", {})))
            except KeyError as exc:
                raise ParseError(line_no, f"node line missing field {exc.args[0]!r}") from exc
        elif kind == "edge":
            try:
                if obj["id"] in seen_edges:
                    raise ParseError(line_no, f"duplicate edge id {obj['id']!r}")
                seen_edges.add(obj["id"])
                edge_instrs.append(
                    CreateEdge(obj["id"], obj["src"], obj["dst"], obj["label"], obj.get("props", {}))
                )
                edge_lines[obj["id"]] = line_no
            except KeyError as exc:
                raise ParseError(line_no, f"edge line missing field {exc.args[0]!r}") from exc
        elif kind == "header":
            raise ParseError(line_no, "duplicate header")
        else:
            raise ParseError(line_no, f"unknown record type {kind!r}")
    if not header_seen and line_no == 0:
        raise ParseError(1, "empty source: missing header record")
    if not header_seen:
        raise ParseError(1, "missing header record")

    graph = KnowledgeGraph()
    for instr in edge_instrs:
        if slug(instr.src) not in seen_nodes or slug(instr.dst) not in seen_nodes:
            raise IntegrityError(edge_lines[instr.id], f"edge {instr.id!r} references a missing node")
    batch = list(node_instrs) + list(edge_instrs)
    if batch:
        try:
            graph.mutate(batch)
        except GraphError as exc:  # defense: mutate re-validates records
            raise IntegrityError(line_no, str(exc)) from exc
    return graph
