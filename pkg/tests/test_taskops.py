"""Graph task algorithms against hand-built fixtures and brute-force oracles."""

import random
from collections import deque

import numpy as np
import pytest

from agraph.graph import CreateEdge, CreateNode, KnowledgeGraph, UnknownId
from agraph.taskops import (
    EmptySelection,
    NoPath,
    SelfComparison,
    cluster,
    complete_subgraph,
    find_path,
    idea_context,
    judge_relation,
    prerequisites,
)


def graph_from(nodes, edges):
    g = KnowledgeGraph()
    batch = [CreateNode(n, ["Concept"], {"name": n}) for n in nodes]
    batch += [CreateEdge(f"e{i:03d}", s, d, label) for i, (s, d, label) in enumerate(edges)]
    g.mutate(batch)
    return g


def chain_graph():
    return graph_from(
        ["a", "b", "c"],
        [("a", "b", "links_to"), ("b", "c", "links_to")],
    )


def random_digraph(rng, n=None, label="rel", p=0.25):
    n = n or rng.randint(2, 12)
    nodes = [f"n{i:02d}" for i in range(n)]
    edges = []
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() < p:
                edges.append((nodes[i], nodes[j], label))
    return graph_from(nodes, edges), nodes


# -- relation judgment ---------------------------------------------------------


def test_judge_relation_direct_edge():
    g = graph_from(
        ["word_embeddings", "bert"],
        [("word_embeddings", "bert", "prerequisite_of")],
    )
    result = judge_relation(g, "word_embeddings", "bert")
    assert len(result.direct_edges) == 1
    assert result.direct_edges[0].label == "prerequisite_of"
    assert result.verdict == "direct_relation"


def test_judge_relation_self_comparison():
    g = chain_graph()
    with pytest.raises(SelfComparison):
        judge_relation(g, "a", "a")


def test_judge_relation_disconnected():
    g = graph_from(["a", "b"], [])
    result = judge_relation(g, "a", "b")
    assert result.direct_edges == ()
    assert result.connecting_paths == ()
    assert result.verdict == "no_relation_found"


def test_judge_relation_indirect_paths():
    g = chain_graph()
    result = judge_relation(g, "a", "c")
    assert result.verdict == "indirect_connection"
    assert result.connecting_paths[0].nodes == ("a", "b", "c")


def test_judge_relation_read_only():
    g = chain_graph()
    v = g.version
    judge_relation(g, "a", "c")
    assert g.version == v


# -- prerequisites ----------------------------------------------------------------


def test_prerequisites_chain():
    g = graph_from(
        ["linear_algebra", "word_embeddings", "bert"],
        [
            ("linear_algebra", "word_embeddings", "prerequisite_of"),
            ("word_embeddings", "bert", "prerequisite_of"),
        ],
    )
    result = prerequisites(g, "bert")
    assert result.nodes == ("word_embeddings", "linear_algebra")
    assert result.depths == (1, 2)
    assert result.cycle is None


def test_prerequisites_no_incoming_edges():
    g = chain_graph()
    assert prerequisites(g, "a").nodes == ()


def test_prerequisites_cycle_detected_not_looped():
    g = graph_from(
        ["a", "b", "c"],
        [
            ("a", "b", "prerequisite_of"),
            ("b", "a", "prerequisite_of"),
            ("b", "c", "prerequisite_of"),
        ],
    )
    result = prerequisites(g, "c")
    assert set(result.nodes) == {"a", "b"}
    assert result.cycle is not None
    assert set(result.cycle) == {"a", "b"}


def closure_oracle(g, target, relation="prerequisite_of"):
    """Boolean-matrix transitive closure of reverse reachability."""
    ids = sorted(g.nodes)
    index = {nid: i for i, nid in enumerate(ids)}
    n = len(ids)
    adj = np.zeros((n, n), dtype=bool)  # adj[i, j]: j is a direct prerequisite of i
    for edge in g.edges.values():
        if edge.label == relation:
            adj[index[edge.dst], index[edge.src]] = True
    closure = adj.copy()
    for _ in range(n):
        closure = closure | (closure @ adj)
    t = index[target]
    return {ids[j] for j in range(n) if closure[t, j] and ids[j] != target}


def random_dag(rng, n=10):
    # edges only from lower to higher index: acyclic by construction
    nodes = [f"n{i:02d}" for i in range(n)]
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.3:
                edges.append((nodes[i], nodes[j], "prerequisite_of"))
    return graph_from(nodes, edges), nodes


def test_prerequisites_random_dags_match_closure_oracle():
    rng = random.Random(11)
    for _ in range(40):
        g, nodes = random_dag(rng, n=rng.randint(3, 10))
        target = rng.choice(nodes)
        result = prerequisites(g, target)
        assert set(result.nodes) == closure_oracle(g, target)
        assert result.cycle is None
        # depth ordering: nondecreasing depths, ids ascending within a depth
        pairs = list(zip(result.depths, result.nodes))
        assert pairs == sorted(pairs)


# -- path searching -----------------------------------------------------------------


def test_find_path_chain():
    g = chain_graph()
    result = find_path(g, "a", "c")
    assert result.nodes == ("a", "b", "c")
    assert result.length == 2
    assert result.edges == ("e000", "e001")


def test_find_path_no_path_across_components():
    g = graph_from(["a", "b"], [])
    with pytest.raises(NoPath):
        find_path(g, "a", "b")


def test_find_path_direction_respected():
    g = chain_graph()
    with pytest.raises(NoPath):
        find_path(g, "c", "a")
    assert find_path(g, "c", "a", treat_undirected=True).nodes == ("c", "b", "a")


def test_find_path_trivial():
    g = chain_graph()
    assert find_path(g, "b", "b").nodes == ("b",)


def oracle_bfs(g, start, goal, undirected):
    """Independent BFS: deque-based, sorted adjacency, first-discovery parents."""
    adj = {nid: set() for nid in g.nodes}
    for e in g.edges.values():
        adj[e.src].add(e.dst)
        if undirected:
            adj[e.dst].add(e.src)
    parent = {start: None}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        if cur == goal:
            path = [goal]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return list(reversed(path))
        for nxt in sorted(adj[cur]):
            if nxt not in parent:
                parent[nxt] = cur
                queue.append(nxt)
    return None


def hop_distance_oracle(g, undirected):
    """Floyd-Warshall hop distances."""
    ids = sorted(g.nodes)
    index = {nid: i for i, nid in enumerate(ids)}
    n = len(ids)
    INF = 10**9
    dist = np.full((n, n), INF)
    np.fill_diagonal(dist, 0)
    for e in g.edges.values():
        if e.src == e.dst:
            continue
        dist[index[e.src], index[e.dst]] = 1
        if undirected:
            dist[index[e.dst], index[e.src]] = 1
    for k in range(n):
        dist = np.minimum(dist, dist[:, k : k + 1] + dist[k : k + 1, :])
    return ids, index, dist


def test_find_path_random_graphs_match_oracles():
    rng = random.Random(5)
    for _ in range(60):
        g, nodes = random_digraph(rng, n=rng.randint(2, 12))
        undirected = rng.random() < 0.5
        ids, index, dist = hop_distance_oracle(g, undirected)
        start, goal = rng.choice(nodes), rng.choice(nodes)
        expected = oracle_bfs(g, start, goal, undirected)
        if expected is None:
            with pytest.raises(NoPath):
                find_path(g, start, goal, treat_undirected=undirected)
            continue
        result = find_path(g, start, goal, treat_undirected=undirected)
        assert result.length == dist[index[start], index[goal]]
        assert list(result.nodes) == expected


# -- clustering ------------------------------------------------------------------------


def test_cluster_two_disjoint_triangles():
    g = graph_from(
        ["a", "b", "c", "x", "y", "z"],
        [
            ("a", "b", "r"), ("b", "c", "r"), ("c", "a", "r"),
            ("x", "y", "r"), ("y", "z", "r"), ("z", "x", "r"),
        ],
    )
    result = cluster(g)
    assert result.clusters == (("a", "b", "c"), ("x", "y", "z"))
    assert result.method == "label_propagation"


def test_cluster_single_node():
    g = graph_from(["solo"], [])
    result = cluster(g)
    assert result.clusters == (("solo",),)


def test_cluster_barbell_splits_at_bridge():
    left = ["a", "b", "c", "d"]
    right = ["e", "f", "g", "h"]
    edges = []
    for part in (left, right):
        for i in range(4):
            for j in range(i + 1, 4):
                edges.append((part[i], part[j], "r"))
    edges.append(("d", "e", "r"))
    g = graph_from(left + right, edges)
    result = cluster(g)
    assert result.clusters == (("a", "b", "c", "d"), ("e", "f", "g", "h"))


def test_cluster_partition_and_idempotence():
    rng = random.Random(17)
    for _ in range(20):
        g, nodes = random_digraph(rng, n=rng.randint(1, 10))
        first = cluster(g)
        all_members = [m for c in first.clusters for m in c]
        assert sorted(all_members) == sorted(nodes)  # disjoint and covering
        assert len(all_members) == len(set(all_members))
        assert cluster(g) == first


def test_cluster_filter_and_empty_selection():
    g = KnowledgeGraph()
    g.mutate([
        CreateNode("p1", ["Paper"], {}),
        CreateNode("t1", ["Topic"], {}),
    ])
    result = cluster(g, "Paper")
    assert result.clusters == (("p1",),)
    with pytest.raises(EmptySelection):
        cluster(g, "Nothing")


# -- subgraph completion ------------------------------------------------------------------


def test_complete_subgraph_four_cycle():
    g = graph_from(
        ["a", "b", "c", "d"],
        [("a", "b", "r"), ("b", "c", "r"), ("c", "d", "r"), ("d", "a", "r")],
    )
    result = complete_subgraph(g, ["a", "b", "c", "d"], k=5)
    assert [(c.src, c.dst) for c in result] == [("a", "c"), ("b", "d")]
    assert [c.score for c in result] == [2.0, 2.0]
    assert result[0].evidence == ("b", "d")


def test_complete_subgraph_complete_graph_no_candidates():
    nodes = ["a", "b", "c"]
    edges = [("a", "b", "r"), ("b", "c", "r"), ("a", "c", "r")]
    g = graph_from(nodes, edges)
    assert complete_subgraph(g, nodes, k=3) == []


def completion_oracle(g, focus, k):
    """Exhaustive non-edge scorer, independently implemented."""
    import math

    adj = {nid: set() for nid in g.nodes}
    for e in g.edges.values():
        if e.src != e.dst:
            adj[e.src].add(e.dst)
            adj[e.dst].add(e.src)
    scope = set(focus)
    for f in focus:
        scope |= adj[f]
    linked = {(e.src, e.dst) for e in g.edges.values()} | {(e.dst, e.src) for e in g.edges.values()}
    rows = []
    for u in sorted(scope):
        for v in sorted(scope):
            if u < v and (u, v) not in linked:
                common = sorted(adj[u] & adj[v])
                aa = sum(1.0 / math.log(len(adj[z])) for z in common if len(adj[z]) >= 2)
                rows.append((-len(common), -aa, u, v))
    rows.sort()
    return [(u, v, float(-s)) for s, _, u, v in rows[:k]]


def test_complete_subgraph_random_matches_oracle():
    rng = random.Random(23)
    for _ in range(40):
        g, nodes = random_digraph(rng, n=10)
        focus = rng.sample(nodes, k=rng.randint(1, 4))
        got = complete_subgraph(g, focus, k=3)
        expected = completion_oracle(g, focus, 3)
        assert [(c.src, c.dst, c.score) for c in got] == expected
        # never an existing edge; scores non-increasing
        linked = {(e.src, e.dst) for e in g.edges.values()}
        for c in got:
            assert (c.src, c.dst) not in linked and (c.dst, c.src) not in linked
        scores = [c.score for c in got]
        assert scores == sorted(scores, reverse=True)


def test_complete_subgraph_unknown_focus():
    g = chain_graph()
    with pytest.raises(UnknownId):
        complete_subgraph(g, ["ghost"], k=1)


# -- idea context --------------------------------------------------------------------------


def test_idea_context_isolated_node():
    g = graph_from(["solo"], [])
    digest = idea_context(g, ["solo"], radius=1)
    assert "solo" in digest
    assert digest.count("-[") == 0


def test_idea_context_radius_one_around_bert():
    g = graph_from(
        ["linear_algebra", "word_embeddings", "bert"],
        [
            ("linear_algebra", "word_embeddings", "prerequisite_of"),
            ("word_embeddings", "bert", "prerequisite_of"),
        ],
    )
    digest = idea_context(g, ["bert"], radius=1)
    assert "bert" in digest and "word_embeddings" in digest
    assert "linear_algebra" not in digest
    assert digest.count("-[") == 1


def test_idea_context_deterministic():
    g = chain_graph()
    assert idea_context(g, ["b"], radius=1) == idea_context(g, ["b"], radius=1)


def test_idea_context_radius_two():
    g = chain_graph()
    digest = idea_context(g, ["a"], radius=2)
    assert "c" in digest
