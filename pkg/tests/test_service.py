"""HTTP facade: endpoint contracts against the scripted pipeline."""

from fastapi.testclient import TestClient

from conftest import (
    autoscript,
    build_nlp_graph,
    class1_extraction_reply,
    integration_reply,
    intent_reply,
    plan_reply,
    reasoning_reply,
    response_reply,
)

from agraph.embedding import HashEmbedder
from agraph.graph import CreateNode, KnowledgeGraph, export_bytes
from agraph.llm import LLMGateway, ScriptedProvider
from agraph.pipeline import Pipeline, PipelineConfig, UserQuery
from agraph.service import create_app

EXAMPLE_1 = "Is word embedding a prerequisite for understanding BERT?"

CHAT_REPLIES = {
    "intent": [intent_reply(1, 95, ["word embedding", "BERT"])],
    "extraction": [class1_extraction_reply("word embeddings", "BERT")],
    "planning": [plan_reply(["Check the relation between word embeddings and BERT"])],
    "reasoning": [reasoning_reply("direct prerequisite edge found")],
    "response": [response_reply("Yes, word embeddings come first.")],
}


def scripted_chat_provider():
    def run(provider):
        pipe = Pipeline(build_nlp_graph(), LLMGateway(provider), HashEmbedder(), PipelineConfig())
        return pipe.run(UserQuery("fixture", EXAMPLE_1))

    _, provider = autoscript(run, CHAT_REPLIES)
    return provider


def make_client(provider=None, graph=None):
    graph = graph if graph is not None else build_nlp_graph()
    provider = provider or ScriptedProvider({})
    pipeline = Pipeline(graph, LLMGateway(provider), HashEmbedder(), PipelineConfig())
    app = create_app(pipeline)
    return TestClient(app), pipeline


def test_health():
    client, pipeline = make_client()
    body = client.get("/v1/health").json()
    assert body["status"] == "ok"
    assert body["nodes"] == 5


def test_tasks_lists_seven_classes():
    client, _ = make_client()
    body = client.get("/v1/tasks").json()
    assert [t["class"] for t in body["tasks"]] == [1, 2, 3, 4, 5, 6, 7]
    assert body["tasks"][0]["name"] == "Relation Judgment"


def test_chat_scripted_golden():
    client, _ = make_client(provider=scripted_chat_provider())
    response = client.post("/v1/chat", json={"session_id": "fixture", "message": EXAMPLE_1})
    assert response.status_code == 200
    body = response.json()
    assert body["answer"]["direct_answer"] == "Yes, word embeddings come first."
    assert body["trace"]["intent"]["task_class"] == 1
    assert body["trace"]["error"] is None
    stages = [c["tag"] for c in body["trace"]["llm_calls"]]
    assert stages == ["intent", "extraction", "planning", "reasoning", "response"]


def test_chat_empty_message():
    client, _ = make_client()
    response = client.post("/v1/chat", json={"session_id": "s", "message": "   "})
    assert response.status_code == 400
    assert response.json()["code"] == "empty_query"


def test_chat_busy_session_409():
    client, _ = make_client(provider=scripted_chat_provider())
    client.post("/v1/chat", json={"session_id": "busy", "message": EXAMPLE_1})
    app = client.app
    state = app.state.sessions["busy"]
    assert state.lock.acquire(blocking=False)
    try:
        response = client.post("/v1/chat", json={"session_id": "busy", "message": EXAMPLE_1})
        assert response.status_code == 409
        assert response.json()["code"] == "session_busy"
    finally:
        state.lock.release()


def test_chat_failure_returns_500_with_partial_trace():
    client, _ = make_client()  # empty script: intent stage cannot complete
    response = client.post("/v1/chat", json={"session_id": "s", "message": "hello graph"})
    assert response.status_code == 500
    body = response.json()
    assert body["code"] == "pipeline_error"
    assert body["stage"] == "intent"
    assert body["trace"]["error"]["stage"] == "intent"


def test_chat_session_history_bounded():
    provider = scripted_chat_provider()
    client, _ = make_client(provider=provider)
    client.post("/v1/chat", json={"session_id": "h", "message": EXAMPLE_1})
    state = client.app.state.sessions["h"]
    assert list(state.history) == [(EXAMPLE_1, "Yes, word embeddings come first.")]
    assert state.history.maxlen == 5


def test_graph_fetch_limit_and_induced_edges():
    client, pipeline = make_client()
    body = client.get("/v1/graph", params={"limit": 2}).json()
    ids = [n["id"] for n in body["nodes"]]
    assert ids == sorted(pipeline.graph.nodes)[:2]
    for edge in body["edges"]:
        assert edge["src"] in ids and edge["dst"] in ids


def test_graph_fetch_label_filter():
    graph = KnowledgeGraph()
    graph.mutate([
        CreateNode("p", ["Paper"], {}),
        CreateNode("t", ["Topic"], {}),
    ])
    client, _ = make_client(graph=graph)
    body = client.get("/v1/graph", params={"label": "Paper"}).json()
    assert [n["id"] for n in body["nodes"]] == ["p"]


def test_graph_read_does_not_change_version():
    client, pipeline = make_client()
    before = pipeline.graph.version
    client.get("/v1/graph")
    client.get("/v1/nodes/bert/neighbors")
    assert pipeline.graph.version == before


def test_neighbors_matches_graph_core():
    client, pipeline = make_client()
    body = client.get("/v1/nodes/word_embeddings/neighbors").json()
    expected = pipeline.graph.neighbors("word_embeddings", "both")
    assert [(n["edge"]["id"], n["node"]["id"]) for n in body["neighbors"]] == [
        (e.id, n.id) for e, n in expected
    ]


def test_neighbors_isolated_node_empty_200():
    graph = KnowledgeGraph()
    graph.mutate([CreateNode("solo", ["T"], {})])
    client, _ = make_client(graph=graph)
    response = client.get("/v1/nodes/solo/neighbors")
    assert response.status_code == 200
    assert response.json()["neighbors"] == []


def test_neighbors_unknown_node_404():
    client, _ = make_client()
    response = client.get("/v1/nodes/ghost/neighbors")
    assert response.status_code == 404
    assert response.json()["code"] == "unknown_node"


def test_neighbors_bad_direction_400():
    client, _ = make_client()
    response = client.get("/v1/nodes/bert/neighbors", params={"direction": "sideways"})
    assert response.status_code == 400
    assert response.json()["code"] == "bad_direction"


# -- updates ---------------------------------------------------------------------


T5_NEW_INFO = {
    "entity": "T5",
    "type": "LanguageModel",
    "properties": {"publication_year": 2020, "architecture": "transformer"},
    "relations": [
        {"type": "DEVELOPED_BY", "target": "Google"},
        {"type": "USED_FOR", "target": "TextToTextTasks"},
    ],
}

T5_QUERIES = [
    "CREATE (t5:LanguageModel {name: 'T5', year: 2020, architecture: 'transformer'})",
    "MATCH (t5:LanguageModel {name: 'T5'}), (org:Organization {name: 'Google'}) "
    "CREATE (t5)-[:DEVELOPED_BY]->(org)",
    "MATCH (t5:LanguageModel {name: 'T5'}), (task:Task {name: 'TextToTextTasks'}) "
    "CREATE (t5)-[:USED_FOR]->(task)",
]


def seeded_update_graph():
    g = KnowledgeGraph()
    g.mutate([
        CreateNode("google", ["Organization"], {"name": "Google"}),
        CreateNode("texttotexttasks", ["Task"], {"name": "TextToTextTasks"}),
    ])
    return g


def update_provider(verification):
    from agraph.pipeline import IntegrationFailed

    def run(provider):
        pipe = Pipeline(
            seeded_update_graph(), LLMGateway(provider), HashEmbedder(), PipelineConfig()
        )
        try:
            pipe.integrate(T5_NEW_INFO)
        except IntegrationFailed:
            pass
        return True

    _, provider = autoscript(
        run, {"update": [integration_reply(T5_QUERIES, verification)]}
    )
    return provider


def test_update_t5_payload():
    provider = update_provider(["MATCH (t5:LanguageModel {name: 'T5'}) RETURN t5.name"])
    client, pipeline = make_client(provider=provider, graph=seeded_update_graph())
    before = pipeline.graph.version
    response = client.post("/v1/graph/update", json={"new_info": T5_NEW_INFO})
    assert response.status_code == 200
    body = response.json()
    assert body["version"] == before + 1
    assert body["applied"] is True
    assert len(body["new_edges"]) == 2


def test_update_failed_verification_422_graph_unchanged():
    provider = update_provider(["MATCH (x:Ghost {name: 'Nobody'}) RETURN x"])
    graph = seeded_update_graph()
    client, pipeline = make_client(provider=provider, graph=graph)
    before = export_bytes(pipeline.graph)
    response = client.post("/v1/graph/update", json={"new_info": T5_NEW_INFO})
    assert response.status_code == 422
    assert response.json()["code"] == "integration_failed"
    assert response.json()["failed_index"] == 0
    assert export_bytes(pipeline.graph) == before


def test_update_empty_payload_400():
    client, _ = make_client()
    response = client.post("/v1/graph/update", json={"new_info": None})
    assert response.status_code == 400
    assert response.json()["code"] == "empty_update"
