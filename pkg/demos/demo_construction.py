"""Build a knowledge graph from a tiny scripted corpus and print the stats table.

Run: python3 demos/demo_construction.py
"""

import json
from importlib import resources

from agraph.embedding import HashEmbedder
from agraph.kgforge import build, chunk_document, extract_seed_entities, load_schema
from agraph.llm import LLMGateway, ScriptedProvider, render_template, script_key

CORPUS = {
    "doc00": "The Biodiesel and Bioblend Regulations 2002 define the biodiesel duty.",
    "doc01": "The Hydrocarbon Oil Duties Act 1979 defines the duty of excise on biodiesel.",
    "doc02": "The Oil Act cites the Hydrocarbon Oil Duties Act 1979 on excise duties.",
}

TRIPLES = {
    "doc00": [("Biodiesel and Bioblend Regulations 2002", "Defines", "biodiesel duty")],
    "doc01": [("Hydrocarbon Oil Duties Act 1979", "Defines", "duty of excise")],
    "doc02": [("Oil Act", "Cites Act", "Hydrocarbon Oil Duties Act 1979")],
}


def main():
    schema_path = resources.files("agraph").joinpath("data", "legal_relations.json")
    schema = load_schema(str(schema_path))

    # script the per-chunk extraction calls by rendering the exact prompts
    seeds = extract_seed_entities(CORPUS, 50)
    relations_text = "\n".join(f"- {r.label}: {r.definition}" for r in schema.relations)
    script = {}
    for doc_id, text in CORPUS.items():
        for chunk in chunk_document(text):
            prompt = render_template("triple_extraction", {
                "relations": relations_text,
                "seed_entities": ", ".join(seeds),
                "chunk": chunk,
            })
            script[script_key(prompt)] = json.dumps({
                "triples": [
                    {"subject": s, "relation": r, "object": o}
                    for s, r, o in TRIPLES[doc_id]
                ]
            })

    gateway = LLMGateway(ScriptedProvider(script))
    result = build(CORPUS, schema, gateway, HashEmbedder())

    print("seed entities:", seeds[:5])
    print(f"\ngraph: {result.graph!r}")
    for edge_id in sorted(result.graph.edges):
        edge = result.graph.edges[edge_id]
        print(f"  {edge.src} -[{edge.label}]-> {edge.dst}   (from {edge.props['source_doc']})")
    print("\nstats:")
    for key, value in result.stats.items():
        print(f"  {key}: {value}")


if __name__ == "__main__":
    main()
