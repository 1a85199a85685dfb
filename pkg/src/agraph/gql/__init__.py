"""Graph query language: parser, executor and canonical renderer.

The language covers the fragment of Cypher an LLM agent is asked to emit:
MATCH over linear path patterns, WHERE with boolean comparisons, CREATE of
nodes and relationships, RETURN with ORDER BY and LIMIT.
"""

from .ast import (
    BoolOp,
    Comparison,
    CreateStatement,
    GraphQuery,
    Literal,
    MatchStatement,
    NodePattern,
    Not,
    PathPattern,
    PropertyRef,
    RelPattern,
    ReturnItem,
    SortKey,
    render,
)
from .executor import ExecutionError, QueryResult, QueryStats, TypeMismatch, execute
from .parser import QuerySyntaxError, UndeclaredVariable, UnsupportedSyntax, parse

__all__ = [
    "BoolOp",
    "Comparison",
    "CreateStatement",
    "ExecutionError",
    "GraphQuery",
    "Literal",
    "MatchStatement",
    "NodePattern",
    "Not",
    "PathPattern",
    "PropertyRef",
    "QueryResult",
    "QueryStats",
    "QuerySyntaxError",
    "RelPattern",
    "ReturnItem",
    "SortKey",
    "TypeMismatch",
    "UndeclaredVariable",
    "UnsupportedSyntax",
    "execute",
    "parse",
    "render",
]
