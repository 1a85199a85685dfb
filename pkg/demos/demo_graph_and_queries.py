"""Build a small citation graph, query it, and round-trip it through a file.

Run: python3 demos/demo_graph_and_queries.py
"""

import io

from agraph import CreateEdge, CreateNode, KnowledgeGraph, export_bytes, import_graph
from agraph import gql

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
print(f"built {graph!r}")

query = gql.parse(
    "MATCH (p1:Paper)-[:CITES]->(p2:Paper {title: 'BERT'}) "
    "WHERE p1.year > 2018 "
    "RETURN p1.title, p1.year ORDER BY p1.year DESC"
)
print("\ncanonical form:", gql.render(query))
result = gql.execute(query, graph)
print("columns:", result.columns)
for row in result.rows:
    print("  ", row)

print("\nwriting a node with CREATE:")
gql.execute(gql.parse("CREATE (t5:Paper {title: 'T5', year: 2020, name: 'T5'})"), graph)
print(f"after create: {graph!r}")

data = export_bytes(graph).decode()
print("\ninterchange format (first 3 lines):")
for line in data.splitlines()[:3]:
    print("  ", line)
again = import_graph(io.StringIO(data))
print("round trip equals original:", again == graph)
