"""SQL tokenization and a small sibling-group parse tree.

The grammar is deliberately shallow: a statement is split into clauses at
top-level clause keywords, parentheses and double-quoted literals form
groups, and simple comparisons (``col = value``) are grouped into one node.
Anything the rules don't recognise stays a plain leaf of its enclosing node,
so parsing only fails on unbalanced parentheses. Parenthesis tokens are always
structural, even between double quotes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

SEPARATOR = "␟"

PUNCTUATION = frozenset("(),;=<>")
QUOTE = '"'

CLAUSE_KEYWORDS = frozenset([
    "SELECT", "FROM", "WHERE", "GROUP", "HAVING", "ORDER", "LIMIT",
    "UNION", "INTERSECT", "EXCEPT",
])

# Reserved words; never treated as a comparison's left operand and kept
# verbatim by pattern abstraction.
SQL_KEYWORDS = CLAUSE_KEYWORDS | frozenset([
    "DISTINCT", "AND", "OR", "NOT", "IN", "AS", "BY", "LIKE", "BETWEEN",
    "IS", "NULL", "COUNT", "MAX", "MIN", "SUM", "AVG", "ASC", "DESC",
    "JOIN", "INNER", "LEFT", "RIGHT", "OUTER", "ON", "EXISTS", "ALL", "ANY",
    "UPPER", "LOWER", "CASE", "WHEN", "THEN", "ELSE", "END",
])

COMPARISON_CHARS = frozenset("=<>!")
COMPARISON_WORDS = frozenset(["LIKE", "BETWEEN"])

LEAF = "leaf"
PAREN_GROUP = "paren_group"
QUOTED_LITERAL = "quoted_literal"
COMPARISON = "comparison"
CLAUSE = "clause"
STATEMENT = "statement"

_SEXPR_NAMES = {
    PAREN_GROUP: "paren",
    QUOTED_LITERAL: "lit",
    COMPARISON: "cmp",
    CLAUSE: "clause",
    STATEMENT: "stmt",
}


class SqlSyntaxError(ValueError):
    """Raised for input the tokenizer or parser cannot handle."""

    def __init__(self, message: str, offset: Optional[int] = None):
        super().__init__(message)
        self.offset = offset


def tokenize_sql(raw: str) -> List[str]:
    """Split a raw SQL string into tokens.

    Whitespace separates tokens; ``( ) , ; = < >`` and ``"`` always stand
    alone. Text between double quotes is split on whitespace only.
    """
    if not raw or not raw.strip():
        raise SqlSyntaxError("empty query", 0)
    tokens: List[str] = []
    buf: List[str] = []

    def flush():
        if buf:
            tokens.append("".join(buf))
            buf.clear()

    i = 0
    n = len(raw)
    while i < n:
        ch = raw[i]
        if ch.isspace():
            flush()
        elif ch == QUOTE:
            flush()
            close = raw.find(QUOTE, i + 1)
            if close < 0:
                raise SqlSyntaxError(f"unterminated quote at offset {i}", i)
            tokens.append(QUOTE)
            tokens.extend(raw[i + 1:close].split())
            tokens.append(QUOTE)
            i = close
        elif ch in PUNCTUATION:
            flush()
            tokens.append(ch)
        else:
            buf.append(ch)
        i += 1
    flush()
    for tok in tokens:
        if SEPARATOR in tok:
            raise SqlSyntaxError(f"reserved separator in token {tok!r}")
    return tokens


@dataclass(frozen=True)
class AstNode:
    kind: str
    span: Tuple[int, int]
    children: Tuple["AstNode", ...] = ()
    text: Optional[str] = None  # leaves only

    @property
    def start(self) -> int:
        return self.span[0]

    @property
    def end(self) -> int:
        return self.span[1]

    def walk(self) -> Iterator["AstNode"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def to_sexpr(self) -> str:
        if self.kind == LEAF:
            return self.text
        inner = " ".join(c.to_sexpr() for c in self.children)
        return f"({_SEXPR_NAMES[self.kind]} {inner})"


def _leaf(text: str, i: int) -> AstNode:
    return AstNode(LEAF, (i, i), (), text)


def _group(kind: str, children: Sequence[AstNode]) -> AstNode:
    return AstNode(kind, (children[0].start, children[-1].end), tuple(children))


class AstTree:
    """Parse tree over a query's original token positions.

    Builds a lookup of every child position at construction so that
    alignment queries don't walk the tree.
    """

    def __init__(self, root: AstNode):
        self.root = root
        self.leaf_count = root.end + 1
        self._starts: dict = {}
        self._ends: dict = {}
        for nid, node in enumerate(root.walk()):
            for idx, child in enumerate(node.children):
                self._starts.setdefault(child.start, {})[nid] = idx
                self._ends.setdefault(child.end, {})[nid] = idx

    def is_aligned(self, start: int, end: int) -> bool:
        if not 0 <= start <= end < self.leaf_count:
            raise IndexError(f"span ({start}, {end}) outside 0..{self.leaf_count - 1}")
        if start == end:
            return True
        ends = self._ends.get(end)
        if not ends:
            return False
        for nid, first in self._starts.get(start, {}).items():
            last = ends.get(nid)
            if last is not None and last >= first:
                return True
        return False

    def nodes(self) -> Iterator[AstNode]:
        return self.root.walk()

    def to_sexpr(self) -> str:
        return self.root.to_sexpr()

    def __repr__(self):
        return f"AstTree({self.to_sexpr()})"


def is_tree_aligned(tree: AstTree, span: Tuple[int, int]) -> bool:
    """True iff ``span`` is the union of consecutive children of one node."""
    return tree.is_aligned(span[0], span[1])


def _is_keyword(node: AstNode, words=SQL_KEYWORDS) -> bool:
    return node.kind == LEAF and node.text.upper() in words


def _is_operator(node: AstNode) -> bool:
    if node.kind != LEAF:
        return False
    return all(c in COMPARISON_CHARS for c in node.text) or node.text.upper() in COMPARISON_WORDS


def _is_operand(node: AstNode) -> bool:
    if node.kind in (QUOTED_LITERAL, PAREN_GROUP):
        return True
    if node.kind != LEAF:
        return False
    text = node.text
    return not (_is_keyword(node) or _is_operator(node) or text in PUNCTUATION or text == QUOTE)


def _comparisons(items: List[AstNode]) -> List[AstNode]:
    out: List[AstNode] = []
    i = 0
    n = len(items)
    while i < n:
        node = items[i]
        if not _is_operand(node) or i + 1 >= n:
            out.append(node)
            i += 1
            continue
        # operator: a run of =<>! leaves, or [NOT] LIKE, or BETWEEN
        j = i + 1
        if items[j].kind == LEAF and items[j].text.upper() == "NOT" and j + 1 < n \
                and items[j + 1].kind == LEAF and items[j + 1].text.upper() == "LIKE":
            j += 2
        elif items[j].kind == LEAF and items[j].text.upper() in COMPARISON_WORDS:
            j += 1
        else:
            while j < n and items[j].kind == LEAF and items[j].text \
                    and all(c in COMPARISON_CHARS for c in items[j].text):
                j += 1
        if j == i + 1 or j >= n or not _is_operand(items[j]):
            out.append(node)
            i += 1
            continue
        end = j + 1
        if items[j - 1].kind == LEAF and items[j - 1].text.upper() == "BETWEEN":
            if end + 1 < n and _is_keyword(items[end], {"AND"}) and _is_operand(items[end + 1]):
                end += 2
        out.append(_group(COMPARISON, items[i:end]))
        i = end
    return out


def _clauses(items: List[AstNode]) -> List[AstNode]:
    heads = [k for k, node in enumerate(items) if _is_keyword(node, CLAUSE_KEYWORDS)]
    if not heads:
        return _comparisons(items)
    out = _comparisons(items[:heads[0]])
    bounds = heads + [len(items)]
    for a, b in zip(bounds, bounds[1:]):
        out.append(_group(CLAUSE, [items[a]] + _comparisons(items[a + 1:b])))
    return out


def parse(tokens: Sequence[str]) -> AstTree:
    """Parse a token sequence into an :class:`AstTree`.

    Raises :class:`SqlSyntaxError` only for empty input or unbalanced
    parentheses.
    """
    tokens = list(tokens)
    if not tokens:
        raise SqlSyntaxError("cannot parse an empty query")
    n = len(tokens)

    def read(pos: int, depth: int) -> Tuple[List[AstNode], int]:
        items: List[AstNode] = []
        while pos < n:
            tok = tokens[pos]
            if tok == QUOTE:
                # parentheses stay structural: a literal never spans one
                close = pos + 1
                while close < n and tokens[close] not in (QUOTE, "(", ")"):
                    close += 1
                if close < n and tokens[close] == QUOTE:
                    items.append(_group(QUOTED_LITERAL,
                                        [_leaf(tokens[k], k) for k in range(pos, close + 1)]))
                    pos = close + 1
                else:
                    # lone quote: keep as a leaf
                    items.append(_leaf(tok, pos))
                    pos += 1
            elif tok == "(":
                inner, close = read(pos + 1, depth + 1)
                if close >= n:
                    raise SqlSyntaxError(f"unbalanced '(' at token {pos}", pos)
                children = [_leaf("(", pos)] + _clauses(inner) + [_leaf(")", close)]
                items.append(_group(PAREN_GROUP, children))
                pos = close + 1
            elif tok == ")":
                if depth == 0:
                    raise SqlSyntaxError(f"unbalanced ')' at token {pos}", pos)
                return items, pos
            else:
                items.append(_leaf(tok, pos))
                pos += 1
        return items, pos

    items, _ = read(0, 0)
    root = AstNode(STATEMENT, (0, n - 1), tuple(_clauses(items)))
    return AstTree(root)

