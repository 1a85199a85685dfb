"""The six task-type algorithms over a small curriculum graph.

Run: python3 demos/demo_task_algorithms.py
"""

from agraph import CreateEdge, CreateNode, KnowledgeGraph
from agraph import taskops

graph = KnowledgeGraph()
graph.mutate([
    CreateNode("linear_algebra", ["Concept"], {"name": "linear algebra"}),
    CreateNode("basic_nlp", ["Concept"], {"name": "basic NLP"}),
    CreateNode("word_embeddings", ["Concept"], {"name": "word embeddings"}),
    CreateNode("bert", ["Concept"], {"name": "BERT"}),
    CreateNode("transformer_architecture", ["Concept"], {"name": "transformer architecture"}),
    CreateNode("natural_language_generation", ["Concept"], {"name": "natural language generation"}),
    CreateEdge("e1", "linear_algebra", "word_embeddings", "prerequisite_of"),
    CreateEdge("e2", "basic_nlp", "word_embeddings", "prerequisite_of"),
    CreateEdge("e3", "word_embeddings", "bert", "prerequisite_of"),
    CreateEdge("e4", "word_embeddings", "transformer_architecture", "prerequisite_of"),
    CreateEdge("e5", "transformer_architecture", "natural_language_generation", "prerequisite_of"),
    CreateEdge("e6", "transformer_architecture", "bert", "prerequisite_of"),
])

print("1. relation judgment: word_embeddings vs bert")
verdict = taskops.judge_relation(graph, "word_embeddings", "bert")
print("   verdict:", verdict.verdict)
for edge in verdict.direct_edges:
    print(f"   {edge.src} -[{edge.label}]-> {edge.dst}")

print("\n2. prerequisites of bert (depth-ordered)")
prereq = taskops.prerequisites(graph, "bert")
for node, depth in zip(prereq.nodes, prereq.depths):
    print(f"   depth {depth}: {node}")

print("\n3. learning path basic_nlp -> natural_language_generation")
path = taskops.find_path(graph, "basic_nlp", "natural_language_generation", treat_undirected=True)
print("   " + " -> ".join(path.nodes))

print("\n4. clusters (label propagation)")
clusters = taskops.cluster(graph)
for index, members in enumerate(clusters.clusters):
    print(f"   cluster {index} ({clusters.method}): {', '.join(members)}")

print("\n5. link suggestions around bert and transformer_architecture")
for cand in taskops.complete_subgraph(graph, ["bert", "transformer_architecture"], k=3):
    print(f"   {cand.src} -- {cand.dst} score={cand.score} via {list(cand.evidence)}")

print("\n6. idea-generation context digest (radius 1 around bert)")
print("   " + taskops.idea_context(graph, ["bert"], radius=1).replace("\n", "\n   "))
