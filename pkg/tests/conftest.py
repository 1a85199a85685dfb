"""Shared fixtures: the NLP teaching graph and scripted-reply machinery."""

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from agraph.graph import CreateEdge, CreateNode, KnowledgeGraph
from agraph.llm import ProviderUnavailable, ScriptedProvider


def build_nlp_graph() -> KnowledgeGraph:
    """Five NLP concepts in a prerequisite lattice; shared by pipeline goldens."""
    g = KnowledgeGraph()
    g.mutate([
        CreateNode("basic_nlp", ["Concept"], {"name": "basic NLP"}),
        CreateNode("word_embeddings", ["Concept"], {"name": "word embeddings"}),
        CreateNode("bert", ["Concept"], {"name": "BERT"}),
        CreateNode("transformer_architecture", ["Concept"], {"name": "transformer architecture"}),
        CreateNode("natural_language_generation", ["Concept"], {"name": "natural language generation"}),
        CreateEdge("e1", "basic_nlp", "word_embeddings", "prerequisite_of"),
        CreateEdge("e2", "word_embeddings", "bert", "prerequisite_of"),
        CreateEdge("e3", "word_embeddings", "transformer_architecture", "prerequisite_of"),
        CreateEdge("e4", "transformer_architecture", "natural_language_generation", "prerequisite_of"),
    ])
    return g


@pytest.fixture
def nlp_graph():
    return build_nlp_graph()


class ScriptExhausted(AssertionError):
    pass


def autoscript(build_and_run, replies):
    """Iteratively build a scripted provider for a multi-stage run.

    ``build_and_run(provider)`` must construct fresh state and run the flow
    (so replays are side-effect free). ``replies`` maps a request tag to the
    list of replies to hand out, in the order that tag's prompts appear.
    Each iteration discovers the next unscripted prompt, binds the next
    reply for its tag, and reruns until the flow completes. Returns
    (result, provider).
    """
    provider = ScriptedProvider({})
    pending = {tag: list(texts) for tag, texts in replies.items()}
    for _ in range(100):
        try:
            return build_and_run(provider), provider
        except Exception as exc:  # walk the cause chain for the scripted miss
            cause = exc
            seen = set()
            while cause is not None and not isinstance(cause, ProviderUnavailable):
                if id(cause) in seen:
                    cause = None
                    break
                seen.add(id(cause))
                cause = getattr(cause, "__cause__", None) or getattr(cause, "__context__", None)
            if cause is None or cause.prompt is None:
                raise
            tag = cause.tag or "untagged"
            queue = pending.get(tag)
            if not queue:
                raise ScriptExhausted(
                    f"no scripted reply left for tag {tag!r}; prompt was:\n{cause.prompt[:400]}"
                ) from exc
            provider.add(cause.prompt, queue.pop(0))
    raise ScriptExhausted("script building did not converge in 100 iterations")


# -- canned agent replies ------------------------------------------------------


def intent_reply(task_class, confidence=95, concepts=(), reasoning="scripted"):
    return json.dumps({
        "key_concepts": list(concepts),
        "linguistic_analysis": "scripted",
        "task_classification": str(task_class),
        "confidence": str(confidence),
        "reasoning": reasoning,
    })


def class1_extraction_reply(concept_1, concept_2, relation="prerequisite_of"):
    return json.dumps({
        "concept_1": concept_1,
        "concept_2": concept_2,
        "relation": relation,
        "relation_description": "scripted",
    })


def class2_extraction_reply(target, domain="NLP"):
    return json.dumps({"target_concept": target, "domain": domain})


def generic_extraction_reply(entities, relations=(), domain="NLP"):
    return json.dumps({
        "entities": list(entities),
        "relations": [
            {"type": t, "source": s, "target": d} for t, s, d in relations
        ],
        "domain": domain,
    })


def plan_reply(descriptions, chain=True):
    tasks = []
    for index, description in enumerate(descriptions, start=1):
        deps = [index - 1] if chain and index > 1 else []
        tasks.append({"id": index, "description": description, "dependencies": deps})
    return json.dumps({
        "goal_analysis": "scripted goal",
        "tasks": tasks,
        "execution_strategy": "run in order",
        "potential_challenges": [],
        "success_criteria": "rows found",
    })


def reasoning_reply(conclusion, observations=("scripted observation",),
                    inferred=(), confidence=90):
    return json.dumps({
        "key_observations": list(observations),
        "inferred_relationships": list(inferred),
        "logical_inferences": [],
        "contextual_interpretation": "scripted",
        "confidence_assessment": str(confidence),
        "conclusion": conclusion,
    })


def response_reply(answer, explanation="scripted explanation", caveats=()):
    return json.dumps({
        "direct_answer": answer,
        "detailed_explanation": explanation,
        "examples": [],
        "caveats": list(caveats),
        "further_exploration": [],
    })


def querygen_reply(cypher):
    return json.dumps({
        "query_objective": "scripted",
        "cypher_query": cypher,
        "query_explanation": "scripted",
        "potential_optimizations": [],
        "refinement_strategy": "scripted",
    })


def integration_reply(cypher_queries, verification_queries):
    return json.dumps({
        "analysis": "scripted",
        "integration_strategy": "scripted",
        "cypher_queries": [
            {"purpose": f"step {i}", "query": q} for i, q in enumerate(cypher_queries, 1)
        ],
        "verification_queries": [
            {"purpose": f"verify {i}", "query": q}
            for i, q in enumerate(verification_queries, 1)
        ],
        "conflict_resolution": "skip duplicates",
        "rollback_plan": "restore snapshot",
    })
