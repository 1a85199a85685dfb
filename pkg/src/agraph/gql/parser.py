"""Recursive-descent parser for the query language.

Grammar (keywords case-insensitive, identifiers case-sensitive):

    statement   := match_stmt | create_stmt
    match_stmt  := MATCH path (',' path)* [WHERE expr]
                   [CREATE path (',' path)*]
                   [RETURN item (',' item)* [ORDER BY key (',' key)*] [LIMIT INT]]
    create_stmt := CREATE path (',' path)*
    path        := node (rel node)*
    node        := '(' [IDENT] [':' IDENT] [props] ')'
    rel         := '-[' ':' IDENT ']->' | '<-[' ':' IDENT ']-'
    props       := '{' IDENT ':' literal (',' ...)* '}'
    expr        := or-expr over comparisons (=, <>, <, >, <=, >=), AND/OR/NOT,
                   parentheses; operands are var.prop accesses or literals
    item        := IDENT ['.' IDENT]
    key         := item [ASC | DESC]

Error positions are 1-based character offsets into the original text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional, Tuple

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
    Statement,
)


class QuerySyntaxError(Exception):
    def __init__(self, position: int, message: str, expected: Tuple[str, ...] = ()):
        detail = f"at position {position}: {message}"
        if expected:
            detail += " (expected " + " | ".join(expected) + ")"
        super().__init__(detail)
        self.position = position
        self.expected = expected


class UnsupportedSyntax(Exception):
    def __init__(self, feature: str, position: int):
        super().__init__(f"unsupported syntax at position {position}: {feature}")
        self.feature = feature
        self.position = position


class UndeclaredVariable(Exception):
    def __init__(self, var: str):
        super().__init__(f"variable {var!r} is not declared in any pattern")
        self.var = var


KEYWORDS = {"MATCH", "WHERE", "RETURN", "CREATE", "ORDER", "BY", "LIMIT", "ASC", "DESC",
            "AND", "OR", "NOT", "TRUE", "FALSE"}

# Recognized Cypher constructs outside the supported fragment; naming them
# yields a far better error than a generic syntax failure.
UNSUPPORTED_KEYWORDS = {"MERGE", "SET", "DELETE", "DETACH", "REMOVE", "WITH", "UNWIND",
                        "OPTIONAL", "UNION", "CALL", "SKIP", "DISTINCT", "FOREACH"}

AGGREGATION_NAMES = {"count", "sum", "avg", "min", "max", "collect"}


@dataclass(frozen=True)
class Token:
    kind: str  # KEYWORD IDENT INT FLOAT STRING PUNCT END
    text: str
    pos: int  # 1-based character offset


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<float>\d+\.\d+)
  | (?P<int>\d+)
  | (?P<string>'(?:\\.|[^'\\])*'|"(?:\\.|[^"\\])*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<arrow_out_open>-\[)
  | (?P<arrow_out_close>\]->)
  | (?P<arrow_in_open><-\[)
  | (?P<arrow_in_close>\]-)
  | (?P<cmp><=|>=|<>|=|<|>)
  | (?P<punct>[(),.:{}\[\]*])
    """,
    re.VERBOSE,
)


def _lex(text: str) -> List[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise QuerySyntaxError(pos + 1, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        value = m.group()
        start = pos + 1
        pos = m.end()
        if kind == "ws":
            continue
        if kind == "ident":
            upper = value.upper()
            if upper in KEYWORDS:
                tokens.append(Token("KEYWORD", upper, start))
            elif upper in UNSUPPORTED_KEYWORDS:
                raise UnsupportedSyntax(upper, start)
            else:
                tokens.append(Token("IDENT", value, start))
        elif kind == "float":
            tokens.append(Token("FLOAT", value, start))
        elif kind == "int":
            tokens.append(Token("INT", value, start))
        elif kind == "string":
            tokens.append(Token("STRING", value, start))
        elif kind == "cmp":
            tokens.append(Token("CMP", value, start))
        elif kind in ("arrow_out_open", "arrow_out_close", "arrow_in_open", "arrow_in_close"):
            tokens.append(Token(kind.upper(), value, start))
        else:
            tokens.append(Token("PUNCT", value, start))
    tokens.append(Token("END", "", len(text) + 1))
    return tokens


def _unquote(raw: str) -> str:
    body = raw[1:-1]
    return body.replace("\\'", "'").replace('\\"', '"').replace("\\\\", "\\")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _lex(text)
        self.index = 0
        self._anon_counter = 0
        self._used_vars: set = set()

    # -- token helpers -----------------------------------------------------

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def advance(self) -> Token:
        tok = self.tokens[self.index]
        self.index += 1
        return tok

    def accept(self, kind: str, text: Optional[str] = None) -> Optional[Token]:
        tok = self.current
        if tok.kind == kind and (text is None or tok.text == text):
            return self.advance()
        return None

    def expect(self, kind: str, text: Optional[str] = None, what: str = "") -> Token:
        tok = self.accept(kind, text)
        if tok is None:
            expected = (text or kind,) if not what else (what,)
            cur = self.current
            shown = cur.text or "end of query"
            raise QuerySyntaxError(cur.pos, f"unexpected {shown!r}", expected)
        return tok

    def _fresh_var(self) -> str:
        while True:
            name = f"_v{self._anon_counter}"
            self._anon_counter += 1
            if name not in self._used_vars:
                return name

    # -- grammar -----------------------------------------------------------

    def parse_statement(self) -> Statement:
        # Pre-scan explicit variable names so generated ones never collide.
        for tok in self.tokens:
            if tok.kind == "IDENT":
                self._used_vars.add(tok.text)
        if self.accept("KEYWORD", "MATCH"):
            return self._parse_match()
        if self.accept("KEYWORD", "CREATE"):
            patterns = self._parse_pattern_list()
            self.expect("END")
            return CreateStatement(tuple(patterns))
        cur = self.current
        raise QuerySyntaxError(cur.pos, f"unexpected {cur.text or 'end of query'!r}", ("MATCH", "CREATE"))

    def _parse_match(self) -> MatchStatement:
        patterns = self._parse_pattern_list()
        where = None
        if self.accept("KEYWORD", "WHERE"):
            where = self._parse_or()
        create: Tuple[PathPattern, ...] = ()
        if self.accept("KEYWORD", "CREATE"):
            create = tuple(self._parse_pattern_list())
        returns: Tuple[ReturnItem, ...] = ()
        order_by: Tuple[SortKey, ...] = ()
        limit = None
        if self.accept("KEYWORD", "RETURN"):
            returns = tuple(self._parse_return_items())
            if self.accept("KEYWORD", "ORDER"):
                self.expect("KEYWORD", "BY")
                order_by = tuple(self._parse_sort_keys())
            if self.accept("KEYWORD", "LIMIT"):
                tok = self.expect("INT", what="row count")
                limit = int(tok.text)
        if not create and not returns:
            raise QuerySyntaxError(
                self.current.pos, "statement has no CREATE or RETURN clause", ("CREATE", "RETURN")
            )
        self.expect("END")
        return MatchStatement(tuple(patterns), where, create, returns, order_by, limit)

    def _parse_pattern_list(self) -> List[PathPattern]:
        patterns = [self._parse_path()]
        while self.accept("PUNCT", ","):
            patterns.append(self._parse_path())
        return patterns

    def _parse_path(self) -> PathPattern:
        nodes = [self._parse_node()]
        rels: List[RelPattern] = []
        while True:
            if self.current.kind == "ARROW_OUT_OPEN":
                open_tok = self.advance()
                rel_type = self._parse_rel_type(open_tok.pos)
                self.expect("ARROW_OUT_CLOSE", what="]->")
                rels.append(RelPattern(rel_type, reversed=False))
                nodes.append(self._parse_node())
            elif self.current.kind == "ARROW_IN_OPEN":
                open_tok = self.advance()
                rel_type = self._parse_rel_type(open_tok.pos)
                self.expect("ARROW_IN_CLOSE", what="]-")
                rels.append(RelPattern(rel_type, reversed=True))
                nodes.append(self._parse_node())
            else:
                break
        return PathPattern(tuple(nodes), tuple(rels))

    def _parse_rel_type(self, open_pos: int) -> str:
        if self.current.kind == "PUNCT" and self.current.text == "*":
            raise UnsupportedSyntax("variable-length path", self.current.pos)
        self.expect("PUNCT", ":", what="relationship type")
        tok = self.expect("IDENT", what="relationship type name")
        if self.current.kind == "PUNCT" and self.current.text == "*":
            raise UnsupportedSyntax("variable-length path", self.current.pos)
        return tok.text

    def _parse_node(self) -> NodePattern:
        self.expect("PUNCT", "(", what="(")
        var = None
        label = None
        props: Tuple[Tuple[str, object], ...] = ()
        tok = self.accept("IDENT")
        if tok:
            var = tok.text
        if self.accept("PUNCT", ":"):
            label = self.expect("IDENT", what="label name").text
        if self.current.kind == "PUNCT" and self.current.text == "{":
            props = self._parse_props()
        self.expect("PUNCT", ")", what=")")
        if var is None:
            var = self._fresh_var()
        return NodePattern(var, label, props)

    def _parse_props(self) -> Tuple[Tuple[str, object], ...]:
        self.expect("PUNCT", "{")
        pairs = []
        while True:
            key = self.expect("IDENT", what="property name").text
            self.expect("PUNCT", ":", what=":")
            pairs.append((key, self._parse_literal().value))
            if not self.accept("PUNCT", ","):
                break
        self.expect("PUNCT", "}", what="}")
        return tuple(pairs)

    def _parse_literal(self) -> Literal:
        tok = self.current
        if tok.kind == "STRING":
            self.advance()
            return Literal(_unquote(tok.text))
        if tok.kind == "INT":
            self.advance()
            return Literal(int(tok.text))
        if tok.kind == "FLOAT":
            self.advance()
            return Literal(float(tok.text))
        if tok.kind == "KEYWORD" and tok.text in ("TRUE", "FALSE"):
            self.advance()
            return Literal(tok.text == "TRUE")
        raise QuerySyntaxError(tok.pos, f"unexpected {tok.text or 'end of query'!r}",
                               ("string", "number", "true", "false"))

    # -- boolean expressions -------------------------------------------------

    def _parse_or(self):
        expr = self._parse_and()
        while self.accept("KEYWORD", "OR"):
            expr = BoolOp("OR", expr, self._parse_and())
        return expr

    def _parse_and(self):
        expr = self._parse_not()
        while self.accept("KEYWORD", "AND"):
            expr = BoolOp("AND", expr, self._parse_not())
        return expr

    def _parse_not(self):
        if self.accept("KEYWORD", "NOT"):
            return Not(self._parse_not())
        if self.current.kind == "PUNCT" and self.current.text == "(":
            # Look ahead: '(' in WHERE always opens a grouped expression.
            self.advance()
            expr = self._parse_or()
            self.expect("PUNCT", ")", what=")")
            return expr
        return self._parse_comparison()

    def _parse_comparison(self) -> Comparison:
        lhs = self._parse_operand()
        tok = self.expect("CMP", what="comparison operator")
        rhs = self._parse_operand()
        return Comparison(lhs, tok.text, rhs)

    def _parse_operand(self):
        tok = self.current
        if tok.kind == "IDENT":
            nxt = self.tokens[self.index + 1]
            if nxt.kind == "PUNCT" and nxt.text == "(":
                if tok.text.lower() in AGGREGATION_NAMES:
                    raise UnsupportedSyntax("aggregation functions", tok.pos)
                raise UnsupportedSyntax("function calls", tok.pos)
            self.advance()
            self.expect("PUNCT", ".", what="property access")
            prop = self.expect("IDENT", what="property name").text
            return PropertyRef(tok.text, prop)
        return self._parse_literal()

    # -- projections -----------------------------------------------------------

    def _parse_return_items(self) -> List[ReturnItem]:
        items = [self._parse_return_item()]
        while self.accept("PUNCT", ","):
            items.append(self._parse_return_item())
        return items

    def _parse_return_item(self) -> ReturnItem:
        tok = self.current
        if tok.kind == "IDENT":
            nxt = self.tokens[self.index + 1]
            if nxt.kind == "PUNCT" and nxt.text == "(":
                if tok.text.lower() in AGGREGATION_NAMES:
                    raise UnsupportedSyntax("aggregation functions", tok.pos)
                raise UnsupportedSyntax("function calls", tok.pos)
        name = self.expect("IDENT", what="variable name").text
        if self.accept("PUNCT", "."):
            prop = self.expect("IDENT", what="property name").text
            return ReturnItem(name, prop)
        return ReturnItem(name)

    def _parse_sort_keys(self) -> List[SortKey]:
        keys = []
        while True:
            item = self._parse_return_item()
            descending = False
            if self.accept("KEYWORD", "DESC"):
                descending = True
            elif self.accept("KEYWORD", "ASC"):
                descending = False
            keys.append(SortKey(item, descending))
            if not self.accept("PUNCT", ","):
                break
        return keys


def _declared_variables(stmt: Statement) -> Tuple[set, set]:
    """(variables bound by MATCH, variables introduced by CREATE)."""
    matched = set()
    created = set()
    if isinstance(stmt, MatchStatement):
        for path in stmt.patterns:
            for node in path.nodes:
                matched.add(node.var)
        for path in stmt.create:
            for node in path.nodes:
                if node.var not in matched:
                    created.add(node.var)
    else:
        for path in stmt.patterns:
            for node in path.nodes:
                created.add(node.var)
    return matched, created


def _validate(stmt: Statement) -> None:
    matched, created = _declared_variables(stmt)
    declared = matched | created

    def check_operand(op):
        if isinstance(op, PropertyRef) and op.var not in declared:
            raise UndeclaredVariable(op.var)

    def walk(expr):
        if isinstance(expr, Comparison):
            check_operand(expr.lhs)
            check_operand(expr.rhs)
        elif isinstance(expr, BoolOp):
            walk(expr.lhs)
            walk(expr.rhs)
        elif isinstance(expr, Not):
            walk(expr.operand)

    if isinstance(stmt, MatchStatement):
        if stmt.where is not None:
            walk(stmt.where)
        for item in stmt.returns:
            if item.var not in declared:
                raise UndeclaredVariable(item.var)
        for key in stmt.order_by:
            if key.item.var not in declared:
                raise UndeclaredVariable(key.item.var)
        seen_created = set()
        for path in stmt.create:
            for node in path.nodes:
                if node.var in matched:
                    if node.label or node.props:
                        raise QuerySyntaxError(
                            1, f"variable {node.var!r} is already bound and cannot be re-labeled"
                        )
                elif node.label is None and node.var not in seen_created:
                    raise UndeclaredVariable(node.var)
                else:
                    seen_created.add(node.var)
    else:
        seen = set()
        for path in stmt.patterns:
            for node in path.nodes:
                if node.var in seen:
                    if node.label or node.props:
                        raise QuerySyntaxError(
                            1, f"variable {node.var!r} is already bound and cannot be re-labeled"
                        )
                elif node.label is None:
                    raise QuerySyntaxError(1, f"created node {node.var!r} requires a label")
                seen.add(node.var)


def parse(text: str) -> GraphQuery:
    """Parse a query string into a validated :class:`GraphQuery`."""
    if not text or not text.strip():
        raise ValueError("query text must be nonempty")
    parser = _Parser(text)
    stmt = parser.parse_statement()
    _validate(stmt)
    matched, created = _declared_variables(stmt)
    variables = tuple(sorted(matched | created))
    return GraphQuery(text=text, ast=stmt, variables=variables)
