"""Query execution against a :class:`~agraph.graph.KnowledgeGraph`.

Matching enumerates every label/property-consistent assignment of graph
nodes to the statement's node patterns, then every consistent edge choice
per relationship pattern. Enumeration order is fixed: node candidates in
id-lexicographic order, pattern slots in declaration order, edges in
edge-id order — so row order is deterministic even without ORDER BY.

CREATE clauses are planned per matched row and applied through a single
atomic mutation batch, so a query containing CREATE bumps the graph
version exactly once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cmp_to_key
from typing import Dict, List, Tuple

from ..graph import (
    CreateEdge,
    CreateNode,
    GraphError,
    KnowledgeGraph,
    NodeRecord,
    slug,
)
from .ast import (
    BoolOp,
    Comparison,
    CreateStatement,
    GraphQuery,
    Literal,
    MatchStatement,
    Not,
    PathPattern,
    ReturnItem,
)


class TypeMismatch(Exception):
    pass


class ExecutionError(Exception):
    """Wraps graph-store errors raised while applying a CREATE clause."""


@dataclass
class QueryStats:
    nodes_created: int = 0
    edges_created: int = 0
    rows_returned: int = 0


@dataclass
class QueryResult:
    columns: List[str]
    rows: List[tuple]
    stats: QueryStats = field(default_factory=QueryStats)


# -- value comparison ----------------------------------------------------------

_KIND_RANK = {"null": 0, "bool": 1, "number": 2, "string": 3}


def _kind(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, (int, float)):
        return "number"
    return "string"


def _compare_checked(lhs, rhs, op: str):
    """WHERE comparison. Cross-kind comparisons are an error, null is absorbing."""
    if lhs is None or rhs is None:
        return None
    lk, rk = _kind(lhs), _kind(rhs)
    if lk != rk:
        raise TypeMismatch(f"cannot compare {lk} with {rk} using {op}")
    if op == "=":
        return lhs == rhs
    if op == "<>":
        return lhs != rhs
    if op == "<":
        return lhs < rhs
    if op == ">":
        return lhs > rhs
    if op == "<=":
        return lhs <= rhs
    return lhs >= rhs


def _order_cmp(lhs, rhs) -> int:
    """Total order over result values: null < bool < number < string."""
    lk, rk = _KIND_RANK[_kind(lhs)], _KIND_RANK[_kind(rhs)]
    if lk != rk:
        return -1 if lk < rk else 1
    if lhs == rhs:
        return 0
    if lhs is None:
        return 0
    return -1 if lhs < rhs else 1


# -- pattern compilation -------------------------------------------------------


@dataclass
class _Slot:
    var: str
    labels: List[str]
    props: dict


@dataclass
class _RelConstraint:
    src_var: str
    dst_var: str
    rel_type: str


def _compile_patterns(patterns: Tuple[PathPattern, ...]):
    slots: List[_Slot] = []
    index: Dict[str, _Slot] = {}
    rels: List[_RelConstraint] = []
    for path in patterns:
        for node in path.nodes:
            existing = index.get(node.var)
            if existing is None:
                existing = _Slot(node.var, [], {})
                index[node.var] = existing
                slots.append(existing)
            if node.label and node.label not in existing.labels:
                existing.labels.append(node.label)
            for key, value in node.props:
                existing.props[key] = value
        for rel, left, right in zip(path.rels, path.nodes, path.nodes[1:]):
            if rel.reversed:
                rels.append(_RelConstraint(right.var, left.var, rel.rel_type))
            else:
                rels.append(_RelConstraint(left.var, right.var, rel.rel_type))
    return slots, rels


def _prop_matches(node: NodeRecord, wanted: dict) -> bool:
    for key, value in wanted.items():
        if key not in node.props:
            return False
        actual = node.props[key]
        if _kind(actual) != _kind(value) or actual != value:
            return False
    return True


def _node_matches(node: NodeRecord, spec: _Slot) -> bool:
    return all(lbl in node.labels for lbl in spec.labels) and _prop_matches(node, spec.props)


def _enumerate_bindings(graph: KnowledgeGraph, slots, rels):
    """Yield (node binding, edge binding) pairs in canonical order."""
    nodes = graph.nodes
    edges = graph.edges
    sorted_node_ids = sorted(nodes)
    candidates = []
    for spec in slots:
        candidates.append([nid for nid in sorted_node_ids if _node_matches(nodes[nid], spec)])

    adjacency: Dict[Tuple[str, str, str], List[str]] = {}
    for edge_id in sorted(edges):
        edge = edges[edge_id]
        adjacency.setdefault((edge.src, edge.dst, edge.label), []).append(edge_id)

    order = {spec.var: i for i, spec in enumerate(slots)}

    def rel_ready_at(depth: int):
        # relationship constraints checkable once `depth` slots are bound
        return [
            rc for rc in rels
            if max(order[rc.src_var], order[rc.dst_var]) == depth - 1
        ]

    binding: Dict[str, str] = {}

    def recurse(depth: int):
        if depth == len(slots):
            # expand edge choices per relationship constraint, in order
            def expand(idx: int, chosen: List[str]):
                if idx == len(rels):
                    yield dict(binding), tuple(chosen)
                    return
                rc = rels[idx]
                key = (binding[rc.src_var], binding[rc.dst_var], rc.rel_type)
                for edge_id in adjacency.get(key, []):
                    yield from expand(idx + 1, chosen + [edge_id])
            yield from expand(0, [])
            return
        spec = slots[depth]
        checks = rel_ready_at(depth + 1)
        for node_id in candidates[depth]:
            binding[spec.var] = node_id
            ok = True
            for rc in checks:
                key = (binding[rc.src_var], binding[rc.dst_var], rc.rel_type)
                if key not in adjacency:
                    ok = False
                    break
            if ok:
                yield from recurse(depth + 1)
        binding.pop(spec.var, None)

    yield from recurse(0)


def _eval_expr(expr, binding: Dict[str, str], graph: KnowledgeGraph):
    if isinstance(expr, Comparison):
        lhs = _operand_value(expr.lhs, binding, graph)
        rhs = _operand_value(expr.rhs, binding, graph)
        return _compare_checked(lhs, rhs, expr.op)
    if isinstance(expr, BoolOp):
        lhs = _eval_expr(expr.lhs, binding, graph)
        rhs = _eval_expr(expr.rhs, binding, graph)
        if lhs is None or rhs is None:
            # null propagates unless the other side already decides
            if expr.op == "AND":
                return False if (lhs is False or rhs is False) else None
            return True if (lhs is True or rhs is True) else None
        return (lhs and rhs) if expr.op == "AND" else (lhs or rhs)
    if isinstance(expr, Not):
        inner = _eval_expr(expr.operand, binding, graph)
        return None if inner is None else (not inner)
    raise TypeError(f"unknown expression {expr!r}")


def _operand_value(op, binding: Dict[str, str], graph: KnowledgeGraph):
    if isinstance(op, Literal):
        return op.value
    node = graph.nodes[binding[op.var]]
    return node.props.get(op.prop)


def _project(item: ReturnItem, binding: Dict[str, str], graph: KnowledgeGraph):
    if item.prop is None:
        return binding[item.var]
    node = graph.nodes[binding[item.var]]
    return node.props.get(item.prop)


# -- CREATE planning -----------------------------------------------------------


def _derive_edge_id(src: str, label: str, dst: str, taken: set) -> str:
    base = f"{src}__{slug(label)}__{dst}"
    if base not in taken:
        return base
    n = 2
    while f"{base}__{n}" in taken:
        n += 1
    return f"{base}__{n}"


def _plan_create(
    create_patterns: Tuple[PathPattern, ...],
    bindings: List[Dict[str, str]],
    graph: KnowledgeGraph,
    skip_duplicates: bool,
):
    """Plan node/edge creations for every binding row.

    A created node's id comes from its ``name`` property slug when present,
    else from the variable name plus a disambiguating counter. Returns
    (node instructions, edge instructions). With ``skip_duplicates`` a node
    whose derived id already exists resolves to the existing node and an edge
    duplicating an existing (src, label, dst) triple is dropped; under the
    default policy the id collision surfaces as a graph-store error on apply.
    """
    node_ids_taken = set(graph.nodes)
    edge_ids_taken = set(graph.edges)
    edge_triples = {(e.src, e.dst, e.label) for e in graph.edges.values()}
    node_instrs: List[CreateNode] = []
    edge_instrs: List[CreateEdge] = []

    for binding in bindings:
        local = dict(binding)  # var -> node id, extended by creations in this row
        for path in create_patterns:
            for node in path.nodes:
                if node.var in local:
                    continue
                if node.label is None:
                    raise ExecutionError(f"variable {node.var!r} is unbound in CREATE")
                props = node.props_dict
                name = props.get("name")
                if isinstance(name, str) and slug(name):
                    node_id = slug(name)
                    if node_id in node_ids_taken:
                        if skip_duplicates:
                            local[node.var] = node_id
                            continue
                        # collision kept in the batch: surfaces as DuplicateId
                        node_instrs.append(CreateNode(node_id, [node.label], props))
                        local[node.var] = node_id
                        continue
                else:
                    base = slug(node.var) or "node"
                    node_id = base
                    n = 2
                    while node_id in node_ids_taken:
                        node_id = f"{base}_{n}"
                        n += 1
                node_instrs.append(CreateNode(node_id, [node.label], props))
                node_ids_taken.add(node_id)
                local[node.var] = node_id
            for rel, left, right in zip(path.rels, path.nodes, path.nodes[1:]):
                if rel.reversed:
                    src_var, dst_var = right.var, left.var
                else:
                    src_var, dst_var = left.var, right.var
                src, dst = local[src_var], local[dst_var]
                triple = (src, dst, rel.rel_type)
                if skip_duplicates and triple in edge_triples:
                    continue
                edge_id = _derive_edge_id(src, rel.rel_type, dst, edge_ids_taken)
                edge_instrs.append(CreateEdge(edge_id, src, dst, rel.rel_type, {}))
                edge_ids_taken.add(edge_id)
                edge_triples.add(triple)
    return node_instrs, edge_instrs


# -- entry point ---------------------------------------------------------------


def execute(
    query: GraphQuery,
    graph: KnowledgeGraph,
    duplicate_policy: str = "error",
) -> QueryResult:
    """Run a parsed query against a graph.

    ``duplicate_policy`` controls CREATE collisions: ``"error"`` (default)
    surfaces duplicate node ids as failures; ``"skip"`` treats an existing
    node id or an existing (src, label, dst) edge as a no-op, which is the
    idempotent re-ingestion behavior knowledge integration relies on.
    """
    if duplicate_policy not in ("error", "skip"):
        raise ValueError(f"unknown duplicate policy {duplicate_policy!r}")
    stmt = query.ast
    stats = QueryStats()

    if isinstance(stmt, CreateStatement):
        node_instrs, edge_instrs = _plan_create(
            stmt.patterns, [{}], graph, skip_duplicates=(duplicate_policy == "skip")
        )
        _apply_batch(graph, node_instrs, edge_instrs, stats)
        return QueryResult(columns=[], rows=[], stats=stats)

    assert isinstance(stmt, MatchStatement)
    slots, rels = _compile_patterns(stmt.patterns)
    rows_bindings: List[Dict[str, str]] = []
    for node_binding, _edge_choice in _enumerate_bindings(graph, slots, rels):
        if stmt.where is not None:
            verdict = _eval_expr(stmt.where, node_binding, graph)
            if verdict is not True:
                continue
        rows_bindings.append(node_binding)

    if stmt.create:
        node_instrs, edge_instrs = _plan_create(
            stmt.create, rows_bindings, graph, skip_duplicates=(duplicate_policy == "skip")
        )
        _apply_batch(graph, node_instrs, edge_instrs, stats)

    columns = [f"{i.var}.{i.prop}" if i.prop else i.var for i in stmt.returns]
    rows: List[tuple] = []
    if stmt.returns:
        for binding in rows_bindings:
            rows.append(tuple(_project(item, binding, graph) for item in stmt.returns))
        if stmt.order_by:
            sort_items = [(key.item, key.descending) for key in stmt.order_by]
            col_index = {}
            for idx, item in enumerate(stmt.returns):
                col_index.setdefault(item, idx)

            binding_by_row = list(zip(rows, rows_bindings))

            def key_value(row, binding, item):
                if item in col_index:
                    return row[col_index[item]]
                return _project(item, binding, graph)

            def compare(a, b):
                for item, desc in sort_items:
                    c = _order_cmp(key_value(a[0], a[1], item), key_value(b[0], b[1], item))
                    if c:
                        return -c if desc else c
                for lhs, rhs in zip(a[0], b[0]):
                    c = _order_cmp(lhs, rhs)
                    if c:
                        return c
                return 0

            binding_by_row.sort(key=cmp_to_key(compare))
            rows = [row for row, _ in binding_by_row]
        if stmt.limit is not None:
            rows = rows[: stmt.limit]
    stats.rows_returned = len(rows)
    return QueryResult(columns=columns, rows=rows, stats=stats)


def _apply_batch(graph, node_instrs, edge_instrs, stats: QueryStats) -> None:
    batch = list(node_instrs) + list(edge_instrs)
    if not batch:
        return
    try:
        graph.mutate(batch)
    except GraphError as exc:
        raise ExecutionError(str(exc)) from exc
    stats.nodes_created = len(node_instrs)
    stats.edges_created = len(edge_instrs)
