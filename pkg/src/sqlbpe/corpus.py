"""Corpus ingestion: plain-text query files and text-to-SQL JSON releases."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Set, Tuple

from .sqlast import SEPARATOR, SqlSyntaxError, tokenize_sql

ROLES = ("train", "valid", "test")
SPLIT_ALIASES = {"train": "train", "valid": "valid", "dev": "valid", "test": "test"}


class CorpusError(ValueError):
    pass


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class QuerySeq:
    tokens: Tuple[str, ...]
    source_id: str = ""

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class Corpus:
    queries: Tuple[QuerySeq, ...]
    role: str = "train"

    def __len__(self):
        return len(self.queries)

    def __iter__(self) -> Iterator[QuerySeq]:
        return iter(self.queries)

    def __getitem__(self, i):
        return self.queries[i]

    @classmethod
    def from_tokens(cls, token_lists: Iterable[Sequence[str]], role: str = "train") -> "Corpus":
        return cls(tuple(QuerySeq(tuple(toks), str(i)) for i, toks in enumerate(token_lists)), role)

    @classmethod
    def from_lines(cls, lines: Iterable[str], role: str = "train") -> "Corpus":
        """Build a corpus from whitespace-separated lines (test/fixture helper)."""
        return cls.from_tokens((line.split() for line in lines), role)

    def token_lists(self) -> List[List[str]]:
        return [list(q.tokens) for q in self.queries]

    def lines(self) -> List[str]:
        return [q.text() for q in self.queries]


@dataclass(frozen=True)
class Sentence:
    text: str
    split_key: str
    bindings: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class DatasetRecord:
    sql_templates: Tuple[str, ...]
    sentences: Tuple[Sentence, ...]
    query_split_key: str
    variables: Tuple[Tuple[str, str], ...] = ()


def load_plaintext(path, role: str = "train", allow_merged: bool = False) -> Corpus:
    """Read one query per line; blank lines are skipped.

    Tokens may contain the merge separator only when ``allow_merged`` is set
    (i.e. the file holds encoded queries).
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    queries = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip(" \t\r"):
            continue
        tokens = line.split()
        if not tokens:
            raise CorpusError(f"{path}:{lineno}: line has no tokens")
        for tok in tokens:
            if not allow_merged and SEPARATOR in tok:
                raise CorpusError(f"{path}:{lineno}: token {tok!r} contains the reserved separator")
        queries.append(QuerySeq(tuple(tokens), str(lineno)))
    return Corpus(tuple(queries), role)


def write_plaintext(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for q in corpus:
            f.write(q.text())
            f.write("\n")


def _require(obj: dict, key: str, index: int):
    if key not in obj:
        raise DatasetError(f"record {index}: missing {key}")
    return obj[key]


def load_dataset_json(path) -> List[DatasetRecord]:
    """Parse a text-to-SQL release (``sql``/``sentences``/``query-split``/``variables``)."""
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    if not isinstance(data, list):
        raise DatasetError(f"{path}: top level must be a JSON array")
    return [parse_record(obj, i) for i, obj in enumerate(data)]


def parse_record(obj, index: int = 0) -> DatasetRecord:
    if not isinstance(obj, dict):
        raise DatasetError(f"record {index}: not an object")
    sql = _require(obj, "sql", index)
    if isinstance(sql, str):
        sql = [sql]
    if not isinstance(sql, list) or not sql or not all(isinstance(s, str) for s in sql):
        raise DatasetError(f"record {index}: sql must be a non-empty array of strings")
    raw_sentences = _require(obj, "sentences", index)
    query_split = _require(obj, "query-split", index)
    raw_vars = obj.get("variables", [])
    if not isinstance(raw_sentences, list):
        raise DatasetError(f"record {index}: sentences must be an array")
    variables = []
    for v in raw_vars:
        if not isinstance(v, dict) or "name" not in v:
            raise DatasetError(f"record {index}: variable entry missing name")
        variables.append((str(v["name"]), str(v.get("type", ""))))
    declared = {name for name, _ in variables}
    sentences = []
    for k, s in enumerate(raw_sentences):
        if not isinstance(s, dict):
            raise DatasetError(f"record {index}: sentence {k} is not an object")
        if "text" not in s:
            raise DatasetError(f"record {index}: sentence {k}: missing text")
        if "question-split" not in s:
            raise DatasetError(f"record {index}: sentence {k}: missing question-split")
        bindings = s.get("variables", {}) or {}
        if not isinstance(bindings, dict):
            raise DatasetError(f"record {index}: sentence {k}: variables must be an object")
        undeclared = sorted(set(bindings) - declared)
        if undeclared:
            raise DatasetError(f"record {index}: sentence {k}: undeclared variable {undeclared[0]}")
        sentences.append(Sentence(str(s["text"]), str(s["question-split"]),
                                  {str(a): str(b) for a, b in bindings.items()}))
    return DatasetRecord(tuple(sql), tuple(sentences), str(query_split), tuple(variables))


def resolve_split(key: str, fold_map: Optional[Mapping[str, str]] = None) -> str:
    if fold_map and key in fold_map:
        key = fold_map[key]
    role = SPLIT_ALIASES.get(key)
    if role is None:
        raise DatasetError(f"unknown split value {key!r}")
    return role


def _instantiate(tokens: List[str], bindings: Mapping[str, str]) -> List[str]:
    out = []
    for tok in tokens:
        if tok in bindings:
            out.extend(bindings[tok].split())
        else:
            out.append(tok)
    return out


def build_split(records: Sequence[DatasetRecord], mode: str, anonymize: bool = True,
                fold_map: Optional[Mapping[str, str]] = None) -> Tuple[Corpus, Corpus, Corpus]:
    """Turn records into (train, valid, test) corpora.

    ``mode="question"`` places each sentence's query by the sentence's split
    key, so one SQL template can land in several corpora. ``mode="query"``
    places every instance of a record by the record's key. The first entry of
    ``sql`` is used as the record's query.
    """
    if mode not in ("question", "query"):
        raise ValueError(f"unknown split mode {mode!r}")
    buckets: Dict[str, list] = {r: [] for r in ROLES}
    template_role: Dict[str, Tuple[str, int]] = {}
    for i, rec in enumerate(records):
        try:
            template = tokenize_sql(rec.sql_templates[0])
        except SqlSyntaxError as exc:
            raise DatasetError(f"record {i}: {exc}") from exc
        if mode == "query":
            role = resolve_split(rec.query_split_key, fold_map)
            key = " ".join(template)
            seen = template_role.setdefault(key, (role, i))
            if seen[0] != role:
                raise DatasetError(f"record {i}: query also in {seen[0]} via record {seen[1]}")
        for k, sent in enumerate(rec.sentences):
            if mode == "question":
                role = resolve_split(sent.split_key, fold_map)
            tokens = template if anonymize else _instantiate(template, sent.bindings)
            if not tokens:
                raise DatasetError(f"record {i}: sentence {k}: empty query")
            buckets[role].append(QuerySeq(tuple(tokens), f"{i}:{k}"))
    return tuple(Corpus(tuple(buckets[r]), r) for r in ROLES)


def token_counts(corpus: Corpus) -> Counter:
    counts: Counter = Counter()
    for q in corpus:
        counts.update(q.tokens)
    return counts


def vocabulary(corpus, min_count: int = 1) -> Set[str]:
    """Token texts occurring at least ``min_count`` times in ``corpus``.

    Accepts a :class:`Corpus` or any iterable of token sequences.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter = Counter()
    for q in corpus:
        counts.update(q)
    return {tok for tok, c in counts.items() if c >= min_count}
