"""Acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see one PASS line per
criterion. The whole module runs with outbound network connections blocked:
every provider is scripted and every embedder is the deterministic hash
embedder.
"""

import json
import random
import socket
import time

import numpy as np
import pytest

from conftest import (
    autoscript,
    build_nlp_graph,
    class1_extraction_reply,
    class2_extraction_reply,
    generic_extraction_reply,
    intent_reply,
    plan_reply,
    querygen_reply,
    reasoning_reply,
    response_reply,
)
from genquery import random_graph as random_query_graph
from genquery import random_query
from oracle_gql import OracleTypeMismatch, oracle_execute

from agraph import gql, taskops
from agraph.embedding import EmbeddingVector, HashEmbedder, cosine
from agraph.evalkit import EvalRecord, SystemVerdict, score
from agraph.graph import (
    CreateEdge,
    CreateNode,
    KnowledgeGraph,
    export_bytes,
    slug,
)
from agraph.llm import LLMGateway, ScriptedProvider, render_template, script_key
from agraph.pipeline import (
    IntegrationFailed,
    Pipeline,
    PipelineConfig,
    PipelineError,
    TaskFailed,
    TaskNode,
    UserQuery,
    canonical_trace_json,
    schema_digest,
)


@pytest.fixture(autouse=True, scope="module")
def no_network():
    """The primary suite must pass with zero network access."""
    real_connect = socket.socket.connect

    def blocked(self, *args, **kwargs):
        raise AssertionError(f"network access attempted: {args}")

    socket.socket.connect = blocked
    try:
        yield
    finally:
        socket.socket.connect = real_connect


def ok(name: str):
    print(f"\nACCEPTANCE {name}: PASS")


# -- 1. query engine equivalence -----------------------------------------------------


def test_query_engine_equivalence_1000_cases():
    rng = random.Random(20240809)
    started = time.perf_counter()
    cases = 0
    while cases < 1000:
        graph = random_query_graph(rng)
        text = random_query(rng)
        query = gql.parse(text)
        assert gql.parse(gql.render(query)).ast == query.ast, text
        engine_error = oracle_error = None
        engine_rows = oracle_rows = None
        try:
            engine_rows = gql.execute(query, graph).rows
        except gql.TypeMismatch:
            engine_error = "type_mismatch"
        try:
            oracle_rows = oracle_execute(query, graph)[1]
        except OracleTypeMismatch:
            oracle_error = "type_mismatch"
        assert engine_error == oracle_error, text
        if engine_error is None:
            assert engine_rows == oracle_rows, text
        cases += 1
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0, f"equivalence sweep took {elapsed:.1f}s"
    ok(f"query engine equivalence ({cases} cases in {elapsed:.1f}s)")


# -- 2. reference query goldens ---------------------------------------------------------


CITATION_QUERY = (
    "MATCH (p1:Paper)-[:CITES]->(p2:Paper {title: 'BERT'}) "
    "WHERE p1.year > 2018 "
    "RETURN p1.title, p1.year "
    "ORDER BY p1.year DESC"
)

INTEGRATION_QUERIES = [
    "CREATE (t5:LanguageModel {name: 'T5', year: 2020, architecture: 'transformer'})",
    "MATCH (t5:LanguageModel {name: 'T5'}), (org:Organization {name: 'Google'}) "
    "CREATE (t5)-[:DEVELOPED_BY]->(org)",
    "MATCH (t5:LanguageModel {name: 'T5'}), (task:Task {name: 'TextToTextTasks'}) "
    "CREATE (t5)-[:USED_FOR]->(task)",
]


def test_reference_query_goldens():
    # citation query over a 4-paper fixture where exactly 2 citing papers
    # were published after 2018
    graph = KnowledgeGraph()
    graph.mutate([
        CreateNode("bert", ["Paper"], {"title": "BERT", "year": 2018}),
        CreateNode("roberta", ["Paper"], {"title": "RoBERTa", "year": 2019}),
        CreateNode("albert", ["Paper"], {"title": "ALBERT", "year": 2020}),
        CreateNode("elmo", ["Paper"], {"title": "ELMo", "year": 2018}),
        CreateEdge("c1", "roberta", "bert", "CITES"),
        CreateEdge("c2", "albert", "bert", "CITES"),
        CreateEdge("c3", "elmo", "bert", "CITES"),
    ])
    for text in [CITATION_QUERY] + INTEGRATION_QUERIES:
        query = gql.parse(text)
        rendered = gql.render(query)
        assert gql.parse(rendered).ast == query.ast, text

    result = gql.execute(gql.parse(CITATION_QUERY), graph)
    assert result.rows == [("ALBERT", 2020), ("RoBERTa", 2019)]
    assert len(result.rows) == 2

    seeded = KnowledgeGraph()
    seeded.mutate([
        CreateNode("google", ["Organization"], {"name": "Google"}),
        CreateNode("texttotexttasks", ["Task"], {"name": "TextToTextTasks"}),
    ])
    nodes_created = edges_created = 0
    for text in INTEGRATION_QUERIES:
        stats = gql.execute(gql.parse(text), seeded).stats
        nodes_created += stats.nodes_created
        edges_created += stats.edges_created
    assert nodes_created == 1
    assert edges_created == 2
    check = gql.execute(gql.parse("MATCH (t5:LanguageModel {name: 'T5'}) RETURN t5"), seeded)
    assert len(check.rows) == 1
    ok("reference query goldens (citation 2 rows; integration node + 2 edges)")


# -- 3. graph-algorithm oracles -----------------------------------------------------------


def _random_algo_graph(rng, labelled_edges=True):
    n = rng.randint(2, 12)
    nodes = [f"n{i:02d}" for i in range(n)]
    g = KnowledgeGraph()
    batch = [CreateNode(nid, ["Concept"], {"name": nid}) for nid in nodes]
    e = 0
    for i in range(n):
        for j in range(n):
            if i != j and rng.random() < 0.22:
                batch.append(CreateEdge(f"e{e:03d}", nodes[i], nodes[j], "rel"))
                e += 1
    g.mutate(batch)
    return g, nodes


def test_find_path_oracle_500_graphs():
    from test_taskops import hop_distance_oracle, oracle_bfs

    rng = random.Random(777)
    mismatches = 0
    for _ in range(500):
        g, nodes = _random_algo_graph(rng)
        undirected = rng.random() < 0.5
        start, goal = rng.choice(nodes), rng.choice(nodes)
        ids, index, dist = hop_distance_oracle(g, undirected)
        expected = oracle_bfs(g, start, goal, undirected)
        if expected is None:
            try:
                taskops.find_path(g, start, goal, treat_undirected=undirected)
                mismatches += 1
            except taskops.NoPath:
                pass
            continue
        got = taskops.find_path(g, start, goal, treat_undirected=undirected)
        if got.length != dist[index[start], index[goal]] or list(got.nodes) != expected:
            mismatches += 1
    assert mismatches == 0
    ok("find_path equals all-pairs brute force on 500 random graphs")


def test_prerequisites_oracle_200_dags():
    from test_taskops import closure_oracle, random_dag

    rng = random.Random(888)
    mismatches = 0
    for _ in range(200):
        g, nodes = random_dag(rng, n=rng.randint(3, 10))
        target = rng.choice(nodes)
        got = taskops.prerequisites(g, target)
        if set(got.nodes) != closure_oracle(g, target) or got.cycle is not None:
            mismatches += 1
    assert mismatches == 0
    ok("prerequisites equals boolean-closure oracle on 200 random DAGs")


def test_complete_subgraph_oracle_200_graphs():
    from test_taskops import completion_oracle

    rng = random.Random(999)
    mismatches = 0
    for _ in range(200):
        g, nodes = _random_algo_graph(rng)
        focus = rng.sample(nodes, k=rng.randint(1, min(4, len(nodes))))
        got = taskops.complete_subgraph(g, focus, k=3)
        expected = completion_oracle(g, focus, 3)
        if [(c.src, c.dst, c.score) for c in got] != expected:
            mismatches += 1
    assert mismatches == 0
    ok("complete_subgraph top-k equals exhaustive scoring on 200 random graphs")


# -- 4. pipeline determinism and routing -----------------------------------------------------


EXAMPLES = [
    ("Is word embedding a prerequisite for understanding BERT?", 1),
    ("What should I learn before diving into transformer architectures?", 2),
    ("How do I progress from basic NLP to advanced natural language generation?", 3),
]


def _example_replies(task_class):
    if task_class == 1:
        extraction = class1_extraction_reply("word embeddings", "BERT")
    elif task_class == 2:
        extraction = class2_extraction_reply("transformer architecture")
    else:
        extraction = generic_extraction_reply(["basic NLP", "natural language generation"])
    return {
        "intent": [intent_reply(task_class, 95)],
        "extraction": [extraction],
        "planning": [plan_reply([f"execute the class {task_class} task"])],
        "reasoning": [reasoning_reply(f"conclusion for class {task_class}")],
        "response": [response_reply(f"answer for class {task_class}")],
    }


def test_pipeline_determinism_and_routing():
    for text, expected_class in EXAMPLES:
        def run(provider, text=text):
            pipe = Pipeline(
                build_nlp_graph(), LLMGateway(provider), HashEmbedder(), PipelineConfig()
            )
            return pipe.run(UserQuery("acceptance", text, received_at=0.0))

        trace1, provider = autoscript(run, _example_replies(expected_class))
        assert trace1.intent.task_class == expected_class
        trace2 = run(provider)
        assert canonical_trace_json(trace1) == canonical_trace_json(trace2)

    # empty query path
    pipe = Pipeline(build_nlp_graph(), LLMGateway(ScriptedProvider({})), HashEmbedder(),
                    PipelineConfig())
    with pytest.raises(PipelineError) as err:
        pipe.run(UserQuery("acceptance", "   "))
    assert err.value.stage == "intent"
    assert "empty query" in str(err.value)

    # retry-exhaustion path: three broken queries consume the whole budget
    def run_exhaustion(provider):
        pipe = Pipeline(
            build_nlp_graph(), LLMGateway(provider), HashEmbedder(),
            PipelineConfig(query_mode="llm", refine_budget=3),
        )
        query = UserQuery("acceptance", "anything")
        intent = pipe.classify_intent(query)
        extraction = pipe.extract_concepts(query, intent)
        return pipe.execute_task(TaskNode(1, "hopeless", []), intent, extraction)

    with pytest.raises(TaskFailed) as task_err:
        autoscript(
            run_exhaustion,
            {
                "intent": [intent_reply(7)],
                "extraction": [generic_extraction_reply(["BERT"])],
                "query_generation": [
                    querygen_reply("MATCH nope 1"),
                    querygen_reply("MATCH nope 2"),
                    querygen_reply("MATCH nope 3"),
                ],
            },
        )
    assert len(task_err.value.attempts) == 3
    ok("pipeline routing 1/2/3, byte-identical reruns, error paths")


# -- 5. update atomicity ----------------------------------------------------------------------


def test_update_atomicity_300_randomized_integrations():
    rng = random.Random(31337)
    embedder = HashEmbedder()
    failures = successes = 0
    for trial in range(300):
        # random base graph
        n = rng.randint(2, 6)
        g = KnowledgeGraph()
        batch = [CreateNode(f"g{i}", ["Thing"], {"name": f"g{i}"}) for i in range(n)]
        for j in range(rng.randint(0, n)):
            batch.append(
                CreateEdge(f"e{j}", f"g{rng.randrange(n)}", f"g{rng.randrange(n)}", "linked_to")
            )
        g.mutate(batch)
        pre_bytes = export_bytes(g)

        item = f"item {trial}"
        anchor = f"g{rng.randrange(n)}"
        create_queries = [
            f"CREATE (x:Thing {{name: '{item}'}})",
            f"MATCH (x:Thing {{name: '{item}'}}), (y:Thing {{name: '{anchor}'}}) "
            "CREATE (x)-[:linked_to]->(y)",
        ]
        mode = rng.choice(["success", "bad_verification", "broken_query"])
        if mode == "success":
            verification = [f"MATCH (x:Thing {{name: '{item}'}}) RETURN x"]
            queries = create_queries
        elif mode == "bad_verification":
            verification = ["MATCH (z:Thing {name: 'ghost'}) RETURN z"]
            queries = create_queries
        else:
            verification = [f"MATCH (x:Thing {{name: '{item}'}}) RETURN x"]
            queries = [create_queries[0], "MERGE (x:Thing)"]

        new_info = {"entity": item, "anchor": anchor, "mode": mode}
        reply = json.dumps({
            "analysis": "trial",
            "cypher_queries": [{"purpose": "p", "query": q} for q in queries],
            "verification_queries": [{"purpose": "v", "query": q} for q in verification],
        })
        pipe = Pipeline(g, LLMGateway(ScriptedProvider({})), embedder, PipelineConfig())
        prompt = render_template(
            "integration",
            {
                "new_info": json.dumps(new_info, ensure_ascii=False, sort_keys=True,
                                       separators=(", ", ": ")),
                "graph_schema": json.dumps(schema_digest(g), ensure_ascii=False, sort_keys=True,
                                           separators=(", ", ": ")),
            },
        )
        pipe.gateway = LLMGateway(ScriptedProvider({script_key(prompt): reply}))

        # independently computed full-delta state
        expected_clone = g.clone()
        expected_clone.mutate([
            CreateNode(slug(item), ["Thing"], {"name": item}),
            CreateEdge(f"{slug(item)}__linked_to__{anchor}", slug(item), anchor, "linked_to"),
        ])
        full_delta_bytes = export_bytes(expected_clone)

        try:
            report = pipe.integrate(new_info)
            successes += 1
            assert export_bytes(g) == full_delta_bytes, f"trial {trial} ({mode})"
            assert report.applied
        except (IntegrationFailed, PipelineError):
            failures += 1
            assert export_bytes(g) == pre_bytes, f"trial {trial} ({mode})"
    assert successes > 0 and failures > 0
    ok(f"update atomicity over 300 randomized integrations "
       f"({successes} applied, {failures} rolled back)")


# -- 6. metrics correctness ----------------------------------------------------------------------


def test_metrics_correctness():
    records, verdicts = [], []
    cases = [(1, 1)] * 3 + [(1, 2)] * 1 + [(2, 1)] * 2 + [(2, 2)] * 4
    for index, (gold, predicted) in enumerate(cases):
        record = EvalRecord(f"r{index}", f"q{index}", gold, review_status="approved")
        records.append(record)
        verdicts.append(SystemVerdict(record.id, predicted, True, True))
    metrics = score(verdicts, records)
    assert metrics.accuracy == pytest.approx(0.7000, abs=5e-4)
    assert metrics.macro_f1 == pytest.approx(0.6970, abs=5e-4)

    # gold-oracle sweep: every prediction right, everything executed
    gold_records = [
        EvalRecord(f"g{c}-{i}", "q", c, review_status="approved")
        for c in range(1, 8) for i in range(3)
    ]
    gold_verdicts = [SystemVerdict(r.id, r.gold_class, True, True) for r in gold_records]
    perfect = score(gold_verdicts, gold_records)
    assert perfect.accuracy == 1.0
    assert perfect.macro_f1 == 1.0
    assert perfect.execution_success_rate == 1.0
    ok("metrics: hand-computed confusion (0.7000 / 0.6970) and perfect-oracle 1.0")


# -- 7. kgforge properties -------------------------------------------------------------------------


def test_kgforge_properties_on_scripted_corpus():
    from test_kgforge import legal_schema, run_build, toy_corpus

    from agraph.kgforge import STATS_FIELDS, fuse

    docs, replies = toy_corpus()
    result, provider = autoscript(run_build, {"triple_extraction": replies})
    labels = set(legal_schema().labels())
    assert result.graph.edges, "scripted corpus must produce edges"
    for edge in result.graph.edges.values():
        assert edge.label in labels
        assert edge.props["source_doc"] in docs

    assert result.report.entities_after <= result.report.entities_before

    # fusion idempotence on the build's own fused triples
    fused_once = []
    emb = HashEmbedder()
    for edge in sorted(result.graph.edges):
        e = result.graph.edges[edge]
        from agraph.kgforge import CandidateTriple

        fused_once.append(CandidateTriple(
            result.graph.nodes[e.src].props["name"], e.label,
            result.graph.nodes[e.dst].props["name"], e.props["source_doc"],
        ))
    again, report = fuse(fused_once, emb)
    assert again == fused_once
    assert report.merges == []

    second = run_build(provider)
    assert export_bytes(second.graph) == export_bytes(result.graph)

    for field in STATS_FIELDS:
        assert field in result.stats
    ok("kgforge: relation closure, fusion idempotence, monotone entities, "
       "byte-identical rebuild, full stats schema")


# -- 8. embedding math --------------------------------------------------------------------------------


def test_embedding_math_property_suite():
    rng = np.random.default_rng(4242)
    for _ in range(1000):
        dims = int(rng.integers(2, 16))
        a = rng.normal(size=dims)
        while np.linalg.norm(a) < 1e-9:
            a = rng.normal(size=dims)
        b = rng.normal(size=dims)
        while np.linalg.norm(b) < 1e-9:
            b = rng.normal(size=dims)
        va, vb = EmbeddingVector(dims, a), EmbeddingVector(dims, b)
        # identity
        assert cosine(va, va) == pytest.approx(1.0, abs=1e-9)
        # symmetry
        assert cosine(va, vb) == pytest.approx(cosine(vb, va), abs=1e-9)
        # scale invariance
        lam = float(rng.uniform(0.001, 1000.0))
        assert cosine(EmbeddingVector(dims, lam * a), vb) == pytest.approx(
            cosine(va, vb), abs=1e-9
        )
        # orthogonality via Gram-Schmidt
        ortho = b - (np.dot(a, b) / np.dot(a, a)) * a
        if np.linalg.norm(ortho) > 1e-9:
            assert cosine(va, EmbeddingVector(dims, ortho)) == pytest.approx(0.0, abs=1e-9)
    value = cosine(
        EmbeddingVector(3, np.array([1.0, 2.0, 2.0])),
        EmbeddingVector(3, np.array([2.0, 1.0, 2.0])),
    )
    assert value == pytest.approx(8 / 9, abs=1e-9)
    assert round(value, 6) == 0.888889
    ok("embedding math: 1000-vector property suite and the 8/9 worked example")


# -- 9. hermetic run ------------------------------------------------------------------------------------


def test_primary_suite_is_hermetic():
    # the module-scoped no_network fixture has been guarding every test above;
    # prove the guard actually trips on any connection attempt
    with pytest.raises(AssertionError, match="network access attempted"):
        socket.socket(socket.AF_INET, socket.SOCK_STREAM).connect(("192.0.2.1", 80))
    ok("full primary suite runs with no network access and no secondary component")
