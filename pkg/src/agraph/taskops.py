"""Deterministic graph algorithms behind the six predefined task types.

Every operation is read-only, every tie-break is lexicographic on node id,
and every algorithm is simple enough to check against a brute-force oracle:
BFS hop-shortest paths, reverse-reachability prerequisite closure,
synchronous label propagation with a connected-components fallback, and
common-neighbor / Adamic-Adar link scoring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .graph import KnowledgeGraph, UnknownId, slug

DEFAULT_PREREQ_RELATION = "prerequisite_of"


class TaskOpError(Exception):
    pass


class SelfComparison(TaskOpError):
    pass


class NoPath(TaskOpError):
    pass


class EmptySelection(TaskOpError):
    pass


@dataclass(frozen=True)
class PathResult:
    nodes: Tuple[str, ...]
    edges: Tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.nodes) - 1


@dataclass(frozen=True)
class RelationJudgment:
    direct_edges: tuple
    connecting_paths: Tuple[PathResult, ...]
    verdict: str  # direct_relation | indirect_connection | no_relation_found


@dataclass(frozen=True)
class PrerequisiteResult:
    nodes: Tuple[str, ...]  # (depth asc, id asc), target excluded
    depths: Tuple[int, ...]
    cycle: Optional[Tuple[str, ...]] = None  # populated when a cycle was detected


@dataclass(frozen=True)
class ClusterSet:
    clusters: Tuple[Tuple[str, ...], ...]  # each sorted; ordered (size desc, first id asc)
    method: str  # label_propagation | connected_components


@dataclass(frozen=True)
class LinkCandidate:
    src: str
    dst: str
    score: float
    evidence: Tuple[str, ...]  # common neighbor ids


# -- adjacency helpers --------------------------------------------------------


def _undirected_neighbors(graph: KnowledgeGraph) -> Dict[str, Set[str]]:
    adj: Dict[str, Set[str]] = {nid: set() for nid in graph.nodes}
    for edge in graph.edges.values():
        if edge.src != edge.dst:
            adj[edge.src].add(edge.dst)
            adj[edge.dst].add(edge.src)
    return adj


def _directed_neighbors(graph: KnowledgeGraph) -> Dict[str, Set[str]]:
    adj: Dict[str, Set[str]] = {nid: set() for nid in graph.nodes}
    for edge in graph.edges.values():
        adj[edge.src].add(edge.dst)
    return adj


def _connecting_edge(graph: KnowledgeGraph, a: str, b: str, undirected: bool) -> str:
    """Lexicographically smallest edge id from a to b (either way if undirected)."""
    best = None
    for edge_id in sorted(graph.edges):
        edge = graph.edges[edge_id]
        if (edge.src == a and edge.dst == b) or (undirected and edge.src == b and edge.dst == a):
            best = edge_id
            break
    if best is None:
        raise AssertionError(f"no edge between {a} and {b}")
    return best


def _require_node(graph: KnowledgeGraph, node_id: str) -> str:
    key = slug(node_id)
    if key not in graph.nodes:
        raise UnknownId(f"unknown node id {key!r}")
    return key


# -- relation judgment -----------------------------------------------------------


def judge_relation(graph: KnowledgeGraph, a: str, b: str) -> RelationJudgment:
    """Direct edges between two nodes, or short connecting paths as evidence."""
    a, b = _require_node(graph, a), _require_node(graph, b)
    if a == b:
        raise SelfComparison("cannot judge a relation between a node and itself")
    direct = tuple(
        graph.edges[eid]
        for eid in sorted(graph.edges)
        if {graph.edges[eid].src, graph.edges[eid].dst} == {a, b}
    )
    if direct:
        return RelationJudgment(direct, (), "direct_relation")
    paths = _shortest_simple_paths(graph, a, b, max_hops=4, limit=3)
    verdict = "indirect_connection" if paths else "no_relation_found"
    return RelationJudgment((), tuple(paths), verdict)


def _shortest_simple_paths(
    graph: KnowledgeGraph, start: str, goal: str, max_hops: int, limit: int
) -> List[PathResult]:
    """Up to ``limit`` simple undirected paths, ordered (length, node sequence)."""
    adj = _undirected_neighbors(graph)
    found: List[Tuple[str, ...]] = []
    for length in range(1, max_hops + 1):
        if len(found) >= limit:
            break

        def extend(path: List[str]):
            if len(found) >= limit:
                return
            if len(path) - 1 == length:
                if path[-1] == goal:
                    found.append(tuple(path))
                return
            for nxt in sorted(adj[path[-1]]):
                if nxt not in path:
                    extend(path + [nxt])

        extend([start])
    results = []
    for nodes in found[:limit]:
        edges = tuple(
            _connecting_edge(graph, u, v, undirected=True) for u, v in zip(nodes, nodes[1:])
        )
        results.append(PathResult(nodes, edges))
    return results


# -- prerequisites -----------------------------------------------------------------


def prerequisites(
    graph: KnowledgeGraph, target: str, prereq_relation: str = DEFAULT_PREREQ_RELATION
) -> PrerequisiteResult:
    """Transitive ancestors of ``target`` along the prerequisite relation.

    Edges point prerequisite -> dependent, so ancestors are found by walking
    edges backwards. Results are ordered (depth asc, id asc); a cycle among
    the ancestors is reported, not looped over.
    """
    target = _require_node(graph, target)
    reverse: Dict[str, Set[str]] = {nid: set() for nid in graph.nodes}
    for edge in graph.edges.values():
        if edge.label == prereq_relation:
            reverse[edge.dst].add(edge.src)

    depth = {target: 0}
    frontier = [target]
    level = 0
    while frontier:
        level += 1
        nxt = []
        for node in frontier:
            for parent in sorted(reverse[node]):
                if parent not in depth:
                    depth[parent] = level
                    nxt.append(parent)
        frontier = sorted(nxt)

    ancestors = [(d, nid) for nid, d in depth.items() if nid != target]
    ancestors.sort()
    cycle = _find_cycle(reverse, set(depth))
    return PrerequisiteResult(
        nodes=tuple(nid for _, nid in ancestors),
        depths=tuple(d for d, _ in ancestors),
        cycle=cycle,
    )


def _find_cycle(reverse: Dict[str, Set[str]], scope: Set[str]) -> Optional[Tuple[str, ...]]:
    """First cycle (by DFS over sorted ids) in the induced reverse-edge subgraph."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {nid: WHITE for nid in scope}
    stack_path: List[str] = []

    def dfs(node: str) -> Optional[Tuple[str, ...]]:
        color[node] = GRAY
        stack_path.append(node)
        for nxt in sorted(reverse[node] & scope):
            if color[nxt] == GRAY:
                start = stack_path.index(nxt)
                return tuple(stack_path[start:])
            if color[nxt] == WHITE:
                cycle = dfs(nxt)
                if cycle:
                    return cycle
        stack_path.pop()
        color[node] = BLACK
        return None

    for nid in sorted(scope):
        if color[nid] == WHITE:
            cycle = dfs(nid)
            if cycle:
                return cycle
    return None


# -- path searching -------------------------------------------------------------


def find_path(
    graph: KnowledgeGraph, start: str, goal: str, treat_undirected: bool = False
) -> PathResult:
    """Hop-shortest path by BFS; neighbor expansion in node-id order makes it unique."""
    start, goal = _require_node(graph, start), _require_node(graph, goal)
    if start == goal:
        return PathResult((start,), ())
    adj = _undirected_neighbors(graph) if treat_undirected else _directed_neighbors(graph)
    parent: Dict[str, str] = {}
    visited = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for node in frontier:
            for neighbor in sorted(adj[node]):
                if neighbor not in visited:
                    visited.add(neighbor)
                    parent[neighbor] = node
                    if neighbor == goal:
                        return _trace_path(graph, parent, start, goal, treat_undirected)
                    nxt.append(neighbor)
        frontier = nxt
    raise NoPath(f"no path from {start!r} to {goal!r}")


def _trace_path(graph, parent, start, goal, undirected) -> PathResult:
    nodes = [goal]
    while nodes[-1] != start:
        nodes.append(parent[nodes[-1]])
    nodes.reverse()
    edges = tuple(
        _connecting_edge(graph, u, v, undirected=undirected) for u, v in zip(nodes, nodes[1:])
    )
    return PathResult(tuple(nodes), edges)


# -- concept clustering ------------------------------------------------------------

_MAX_PROPAGATION_ROUNDS = 100


def _select_nodes(graph: KnowledgeGraph, seed_filter: Optional[str]) -> List[str]:
    if seed_filter is None:
        return sorted(graph.nodes)
    selected = [
        nid
        for nid, node in graph.nodes.items()
        if seed_filter in node.labels or node.props.get("domain") == seed_filter
    ]
    return sorted(selected)


def cluster(graph: KnowledgeGraph, seed_filter: Optional[str] = None) -> ClusterSet:
    """Group selected nodes by synchronous label propagation.

    Labels start as node ids; each round every node adopts the most frequent
    label among its neighbors (ties to the lexicographically smallest label).
    Stops at a fixpoint or after 100 rounds; a non-converging run falls back
    to connected components, recorded in the method tag.
    """
    selected = _select_nodes(graph, seed_filter)
    if not selected:
        raise EmptySelection(f"no nodes selected by filter {seed_filter!r}")
    member = set(selected)
    full_adj = _undirected_neighbors(graph)
    adj = {nid: sorted(full_adj[nid] & member) for nid in selected}

    labels = {nid: nid for nid in selected}
    converged = False
    for _ in range(_MAX_PROPAGATION_ROUNDS):
        nxt = {}
        for nid in selected:
            neighbor_labels = [labels[m] for m in adj[nid]]
            if not neighbor_labels:
                nxt[nid] = labels[nid]
                continue
            counts: Dict[str, int] = {}
            for lbl in neighbor_labels:
                counts[lbl] = counts.get(lbl, 0) + 1
            # most frequent label, ties to the lexicographically smallest
            nxt[nid] = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        if nxt == labels:
            converged = True
            break
        labels = nxt

    if converged:
        groups: Dict[str, List[str]] = {}
        for nid in selected:
            groups.setdefault(labels[nid], []).append(nid)
        clusters = [tuple(sorted(members)) for members in groups.values()]
        method = "label_propagation"
    else:
        clusters = [tuple(sorted(comp)) for comp in _components(adj)]
        method = "connected_components"
    clusters.sort(key=lambda c: (-len(c), c[0]))
    return ClusterSet(tuple(clusters), method)


def _components(adj: Dict[str, list]) -> List[Set[str]]:
    seen: Set[str] = set()
    comps = []
    for nid in sorted(adj):
        if nid in seen:
            continue
        comp = {nid}
        stack = [nid]
        while stack:
            cur = stack.pop()
            for nxt in adj[cur]:
                if nxt not in comp:
                    comp.add(nxt)
                    stack.append(nxt)
        seen |= comp
        comps.append(comp)
    return comps


# -- subgraph completion -------------------------------------------------------------


def complete_subgraph(graph: KnowledgeGraph, focus: Sequence[str], k: int = 5) -> List[LinkCandidate]:
    """Top-k missing links within the focus set and its 1-hop neighborhood.

    Score is the common-neighbor count; ties break by Adamic-Adar
    (sum of 1/ln(deg) over common neighbors with degree >= 2), then by the
    canonical (src, dst) pair.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    focus_ids = [_require_node(graph, f) for f in focus]
    adj = _undirected_neighbors(graph)
    scope: Set[str] = set(focus_ids)
    for nid in focus_ids:
        scope |= adj[nid]

    existing = set()
    for edge in graph.edges.values():
        existing.add((edge.src, edge.dst))
        existing.add((edge.dst, edge.src))

    scored = []
    for src in sorted(scope):
        for dst in sorted(scope):
            if dst <= src or (src, dst) in existing:
                continue
            common = sorted(adj[src] & adj[dst])
            score = len(common)
            adamic = sum(1.0 / math.log(len(adj[z])) for z in common if len(adj[z]) >= 2)
            scored.append((-score, -adamic, src, dst, common))
    scored.sort()
    return [
        LinkCandidate(src=src, dst=dst, score=float(-neg), evidence=tuple(common))
        for neg, _, src, dst, common in scored[:k]
    ]


# -- idea context ---------------------------------------------------------------------


def idea_context(graph: KnowledgeGraph, concepts: Sequence[str], radius: int = 1) -> str:
    """Stable text digest of the subgraph within ``radius`` hops of the concepts."""
    if radius not in (1, 2):
        raise ValueError("radius must be 1 or 2")
    roots = [_require_node(graph, c) for c in concepts]
    adj = _undirected_neighbors(graph)
    reach: Set[str] = set(roots)
    frontier = set(roots)
    for _ in range(radius):
        nxt = set()
        for node in frontier:
            nxt |= adj[node]
        nxt -= reach
        reach |= nxt
        frontier = nxt

    lines = ["nodes:"]
    for nid in sorted(reach):
        node = graph.nodes[nid]
        props = ", ".join(f"{key}={node.props[key]!r}" for key in sorted(node.props))
        label_text = ",".join(node.labels)
        lines.append(f"  {nid} [{label_text}]" + (f" {{{props}}}" if props else ""))
    lines.append("triples:")
    for eid in sorted(graph.edges):
        edge = graph.edges[eid]
        if edge.src in reach and edge.dst in reach:
            lines.append(f"  {edge.src} -[{edge.label}]-> {edge.dst}")
    return "\n".join(lines)
