"""Merge tables: apply (encode), invert (decode), save and load.

A merged token is named ``left + U+241F + right``. Input tokens never contain
U+241F, so every merged name splits back into the base tokens it covers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import FrozenSet, List, Optional, Sequence

from .corpus import Corpus, QuerySeq
from .sqlast import SEPARATOR

MAGIC = "sqlbpe-merges"
VERSION = "v1"
BASE_MARKER = "---"


class CodecError(ValueError):
    pass


class TableFormatError(CodecError):
    pass


def merged_name(left: str, right: str) -> str:
    return f"{left}{SEPARATOR}{right}"


@dataclass(frozen=True)
class MergeRule:
    left: str
    right: str
    merged: str
    step_index: int


@dataclass
class MergeTable:
    rules: List[MergeRule] = field(default_factory=list)
    base_vocabulary: FrozenSet[str] = frozenset()
    mode: str = "plain"
    r: int = 20
    m: int = 100

    def __post_init__(self):
        self.base_vocabulary = frozenset(self.base_vocabulary)
        self._merged = frozenset(rule.merged for rule in self.rules)

    def __len__(self):
        return len(self.rules)

    @classmethod
    def from_pairs(cls, pairs, base_vocabulary=(), **meta) -> "MergeTable":
        rules = [MergeRule(a, b, merged_name(a, b), i) for i, (a, b) in enumerate(pairs)]
        return cls(rules, frozenset(base_vocabulary), **meta)

    def pairs(self):
        return [(rule.left, rule.right) for rule in self.rules]

    def merged_tokens(self) -> FrozenSet[str]:
        return self._merged


def _apply_rule(tokens: List[str], left: str, right: str, merged: str) -> List[str]:
    out = []
    i = 0
    n = len(tokens)
    while i < n:
        if i + 1 < n and tokens[i] == left and tokens[i + 1] == right:
            out.append(merged)
            i += 2
        else:
            out.append(tokens[i])
            i += 1
    return out


def encode_tokens(tokens: Sequence[str], table: MergeTable) -> List[str]:
    tokens = list(tokens)
    present = set(tokens)
    for rule in table.rules:
        if rule.left not in present or rule.right not in present:
            continue
        new = _apply_rule(tokens, rule.left, rule.right, rule.merged)
        if len(new) != len(tokens):
            tokens = new
            present = set(tokens)
    return tokens


def decode_tokens(tokens: Sequence[str], table: MergeTable) -> List[str]:
    merged = table.merged_tokens()
    out = []
    for tok in tokens:
        if SEPARATOR in tok:
            if tok not in merged:
                raise CodecError(f"token {tok!r} is not produced by any merge rule")
            out.extend(tok.split(SEPARATOR))
        else:
            out.append(tok)
    return out


def encode(corpus: Corpus, table: MergeTable) -> Corpus:
    """Apply every rule, in order, to every query."""
    return Corpus(tuple(QuerySeq(tuple(encode_tokens(q.tokens, table)), q.source_id)
                        for q in corpus), corpus.role)


def decode(corpus: Corpus, table: MergeTable) -> Corpus:
    return Corpus(tuple(QuerySeq(tuple(decode_tokens(q.tokens, table)), q.source_id)
                        for q in corpus), corpus.role)


def header_line(table: MergeTable) -> str:
    return f"{MAGIC} {VERSION} mode={table.mode} r={table.r} m={table.m}"


def save_table(table: MergeTable, path) -> None:
    lines = [header_line(table)]
    lines.extend(f"{rule.left}\t{rule.right}" for rule in table.rules)
    if table.base_vocabulary:
        lines.append(BASE_MARKER)
        lines.extend(sorted(table.base_vocabulary))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_header(line: str) -> dict:
    parts = line.split()
    if len(parts) < 2 or parts[0] != MAGIC:
        raise TableFormatError("line 1: not a merge table header")
    if parts[1] != VERSION:
        raise TableFormatError(f"line 1: unsupported version {parts[1]!r} (expected {VERSION})")
    meta = {}
    for item in parts[2:]:
        key, sep, value = item.partition("=")
        if not sep or key not in ("mode", "r", "m"):
            raise TableFormatError(f"line 1: bad header field {item!r}")
        meta[key] = value
    try:
        return {
            "mode": meta.get("mode", "plain"),
            "r": int(meta.get("r", 20)),
            "m": int(meta.get("m", 100)),
        }
    except ValueError as exc:
        raise TableFormatError(f"line 1: {exc}") from exc


def _valid_side(tok: str, known_merged: set) -> bool:
    if not tok or any(c.isspace() for c in tok):
        return False
    return SEPARATOR not in tok or tok in known_merged


def load_table(path) -> MergeTable:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise TableFormatError(f"cannot read {path}: {exc}") from exc
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise TableFormatError("line 1: empty file")
    meta = _parse_header(lines[0])
    pairs = []
    known: set = set()
    base: Optional[set] = None
    for lineno, line in enumerate(lines[1:], start=2):
        if base is not None:
            if not line or SEPARATOR in line or any(c.isspace() for c in line):
                raise TableFormatError(f"line {lineno}: bad base token {line!r}")
            base.add(line)
            continue
        if line == BASE_MARKER:
            base = set()
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise TableFormatError(f"line {lineno}: expected <left>\\t<right>")
        left, right = fields
        if not (_valid_side(left, known) and _valid_side(right, known)):
            raise TableFormatError(f"line {lineno}: rule uses an underivable token")
        pairs.append((left, right))
        known.add(merged_name(left, right))
    return MergeTable.from_pairs(pairs, base or (), **meta)
