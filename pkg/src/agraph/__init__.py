"""agraph: a knowledge-graph agent platform.

An embedded property graph, a Cypher-subset query engine, a seven-stage
agent pipeline over a pluggable LLM gateway, deterministic graph task
algorithms, zero-shot graph construction from text corpora, an evaluation
harness, and an HTTP service tying it all together.
"""

__version__ = "0.1.0"

from .graph import (
    CreateEdge,
    CreateNode,
    DeleteEdge,
    DeleteNode,
    EdgeRecord,
    GraphSnapshot,
    KnowledgeGraph,
    NodeRecord,
    SchemaHint,
    export_bytes,
    export_graph,
    import_graph,
    slug,
)

__all__ = [
    "CreateEdge",
    "CreateNode",
    "DeleteEdge",
    "DeleteNode",
    "EdgeRecord",
    "GraphSnapshot",
    "KnowledgeGraph",
    "NodeRecord",
    "SchemaHint",
    "export_bytes",
    "export_graph",
    "import_graph",
    "slug",
    "__version__",
]
