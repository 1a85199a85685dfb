"""One fully scripted pipeline run, end to end, with the trace printed.

The scripted provider answers by SHA-256 of the rendered prompt, so this
demo is a pure function: run it twice and the trace bytes match.

Run: python3 demos/demo_scripted_chat.py
"""

import json

from agraph import CreateEdge, CreateNode, KnowledgeGraph
from agraph.embedding import HashEmbedder
from agraph.llm import LLMGateway, ProviderUnavailable, ScriptedProvider
from agraph.pipeline import Pipeline, PipelineConfig, UserQuery, canonical_trace_json

QUESTION = "Is word embedding a prerequisite for understanding BERT?"

REPLIES = {
    "intent": [json.dumps({
        "key_concepts": ["word embedding", "BERT"],
        "linguistic_analysis": "asks about a relationship between two concepts",
        "task_classification": "1",
        "confidence": "95",
        "reasoning": "the query asks whether one concept is needed for another",
    })],
    "extraction": [json.dumps({
        "concept_1": "word embeddings",
        "concept_2": "BERT",
        "relation": "prerequisite_of",
        "relation_description": "one concept must be learned before the other",
    })],
    "planning": [json.dumps({
        "goal_analysis": "verify the prerequisite relation in the graph",
        "tasks": [{"id": 1, "description": "check the relation", "dependencies": []}],
        "execution_strategy": "single lookup",
        "potential_challenges": [],
        "success_criteria": "edge found or ruled out",
    })],
    "reasoning": [json.dumps({
        "key_observations": ["a direct prerequisite_of edge exists"],
        "inferred_relationships": ["word_embeddings prerequisite_of bert"],
        "logical_inferences": ["learning word embeddings first is required"],
        "contextual_interpretation": "the graph confirms the premise",
        "confidence_assessment": "92",
        "conclusion": "word embeddings are a prerequisite for BERT",
    })],
    "response": [json.dumps({
        "direct_answer": "Yes. Word embeddings are a prerequisite for understanding BERT.",
        "detailed_explanation": "The knowledge graph holds a direct prerequisite edge.",
        "examples": [],
        "caveats": [],
        "further_exploration": ["transformer architecture"],
    })],
}


def build_graph():
    g = KnowledgeGraph()
    g.mutate([
        CreateNode("word_embeddings", ["Concept"], {"name": "word embeddings"}),
        CreateNode("bert", ["Concept"], {"name": "BERT"}),
        CreateEdge("e1", "word_embeddings", "bert", "prerequisite_of"),
    ])
    return g


def run(provider):
    pipeline = Pipeline(build_graph(), LLMGateway(provider), HashEmbedder(), PipelineConfig())
    return pipeline.run(UserQuery("demo", QUESTION, received_at=0.0))


def main():
    # bind each stage's scripted reply to the exact prompt the pipeline renders
    provider = ScriptedProvider({})
    pending = {tag: list(texts) for tag, texts in REPLIES.items()}
    while True:
        try:
            trace = run(provider)
            break
        except Exception as exc:
            cause = exc
            while cause is not None and not isinstance(cause, ProviderUnavailable):
                cause = cause.__cause__
            if cause is None or not pending.get(cause.tag):
                raise
            provider.add(cause.prompt, pending[cause.tag].pop(0))

    print("question:", QUESTION)
    print("class:", trace.intent.task_class, f"({trace.intent.task_name})")
    print("linked entities:", [(m, r.node_id) for m, r in trace.extraction.entities])
    print("task rows:", trace.executions[0].result.rows)
    print("answer:", trace.response.direct_answer)
    print("\nLLM calls in trace:", [c.tag for c in trace.llm_calls])
    print("deterministic:", canonical_trace_json(trace) == canonical_trace_json(run(provider)))


if __name__ == "__main__":
    main()
