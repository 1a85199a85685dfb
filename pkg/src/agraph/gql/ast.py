"""AST node types for the graph query language, plus canonical rendering.

The canonical rendering is the fixed point of parse/render: rendering any
parsed statement and parsing it again yields an equal AST. Property maps
render sorted by key, anonymous node patterns render with their generated
variable names, ASC sort direction is implied.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

Value = Union[str, int, float, bool]


@dataclass(frozen=True)
class Literal:
    value: Value


@dataclass(frozen=True)
class PropertyRef:
    var: str
    prop: str


Operand = Union[Literal, PropertyRef]


@dataclass(frozen=True)
class Comparison:
    lhs: Operand
    op: str  # one of = <> < > <= >=
    rhs: Operand


@dataclass(frozen=True)
class BoolOp:
    op: str  # AND | OR
    lhs: "Expr"
    rhs: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


Expr = Union[Comparison, BoolOp, Not]


@dataclass(frozen=True)
class NodePattern:
    var: str
    label: Optional[str] = None
    props: Tuple[Tuple[str, Value], ...] = ()

    def __post_init__(self):
        # property order is not meaningful; normalize so ASTs compare equal
        object.__setattr__(self, "props", tuple(sorted(self.props, key=lambda p: p[0])))

    @property
    def props_dict(self) -> dict:
        return dict(self.props)


@dataclass(frozen=True)
class RelPattern:
    rel_type: str
    reversed: bool = False  # True for <-[:T]-


@dataclass(frozen=True)
class PathPattern:
    nodes: Tuple[NodePattern, ...]
    rels: Tuple[RelPattern, ...]

    def __post_init__(self):
        assert len(self.nodes) == len(self.rels) + 1


@dataclass(frozen=True)
class ReturnItem:
    var: str
    prop: Optional[str] = None


@dataclass(frozen=True)
class SortKey:
    item: ReturnItem
    descending: bool = False


@dataclass(frozen=True)
class MatchStatement:
    patterns: Tuple[PathPattern, ...]
    where: Optional[Expr] = None
    create: Tuple[PathPattern, ...] = ()
    returns: Tuple[ReturnItem, ...] = ()
    order_by: Tuple[SortKey, ...] = ()
    limit: Optional[int] = None


@dataclass(frozen=True)
class CreateStatement:
    patterns: Tuple[PathPattern, ...]


Statement = Union[MatchStatement, CreateStatement]


@dataclass(frozen=True)
class GraphQuery:
    text: str
    ast: Statement
    variables: Tuple[str, ...]


# -- canonical rendering -------------------------------------------------------


def _render_value(value: Value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace("'", "\\'")
        return f"'{escaped}'"
    return repr(value)


def _render_node(node: NodePattern) -> str:
    inner = node.var
    if node.label:
        inner += f":{node.label}"
    if node.props:
        pairs = ", ".join(f"{k}: {_render_value(v)}" for k, v in sorted(node.props))
        inner += f" {{{pairs}}}"
    return f"({inner})"


def _render_path(path: PathPattern) -> str:
    out = [_render_node(path.nodes[0])]
    for rel, node in zip(path.rels, path.nodes[1:]):
        if rel.reversed:
            out.append(f"<-[:{rel.rel_type}]-")
        else:
            out.append(f"-[:{rel.rel_type}]->")
        out.append(_render_node(node))
    return "".join(out)


def _render_operand(op: Operand) -> str:
    if isinstance(op, PropertyRef):
        return f"{op.var}.{op.prop}"
    return _render_value(op.value)


def _render_expr(expr: Expr) -> str:
    if isinstance(expr, Comparison):
        return f"{_render_operand(expr.lhs)} {expr.op} {_render_operand(expr.rhs)}"
    if isinstance(expr, Not):
        inner = _render_expr(expr.operand)
        if isinstance(expr.operand, (BoolOp,)):
            inner = f"({inner})"
        return f"NOT {inner}"
    if isinstance(expr, BoolOp):
        parts = []
        for side in (expr.lhs, expr.rhs):
            text = _render_expr(side)
            if isinstance(side, BoolOp) and side.op != expr.op:
                text = f"({text})"
            elif isinstance(side, BoolOp) and side.op == expr.op and side is expr.rhs:
                # parse is left-associative; parenthesize a right-nested chain
                text = f"({text})"
            parts.append(text)
        return f" {expr.op} ".join(parts)
    raise TypeError(f"unknown expression {expr!r}")


def _render_item(item: ReturnItem) -> str:
    return f"{item.var}.{item.prop}" if item.prop else item.var


def render(query: Union[GraphQuery, Statement]) -> str:
    """Render a statement to its canonical query string."""
    stmt = query.ast if isinstance(query, GraphQuery) else query
    if isinstance(stmt, CreateStatement):
        return "CREATE " + ", ".join(_render_path(p) for p in stmt.patterns)
    parts = ["MATCH " + ", ".join(_render_path(p) for p in stmt.patterns)]
    if stmt.where is not None:
        parts.append("WHERE " + _render_expr(stmt.where))
    if stmt.create:
        parts.append("CREATE " + ", ".join(_render_path(p) for p in stmt.create))
    if stmt.returns:
        parts.append("RETURN " + ", ".join(_render_item(i) for i in stmt.returns))
    if stmt.order_by:
        keys = []
        for key in stmt.order_by:
            keys.append(_render_item(key.item) + (" DESC" if key.descending else ""))
        parts.append("ORDER BY " + ", ".join(keys))
    if stmt.limit is not None:
        parts.append(f"LIMIT {stmt.limit}")
    return " ".join(parts)
