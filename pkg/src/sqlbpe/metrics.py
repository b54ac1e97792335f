"""Corpus statistics: lengths, OOV sets, and query patterns."""
from __future__ import annotations

import re
from typing import Iterable, Optional, Sequence

from .corpus import vocabulary
from .sqlast import PUNCTUATION, QUOTE, SQL_KEYWORDS

IDENT = "IDENT"
VALUE = "VALUE"

DEFAULT_KEYWORDS = frozenset(SQL_KEYWORDS | PUNCTUATION | {
    QUOTE, "*", ".", "+", "-", "/", "%", "<=", ">=", "<>", "!=", "==",
})

_NUMBER = re.compile(r"[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?")
# anonymisation placeholders look like ``department0`` or ``city_name1``
_PLACEHOLDER = re.compile(r"[a-z][a-z_]*\d+")


def _tokens(query) -> list:
    return list(getattr(query, "tokens", query))


def _mean(lengths: Sequence[int]) -> float:
    return sum(lengths) / len(lengths) if lengths else 0.0


def length_stats(before, after) -> dict:
    """Mean query length before and after encoding, and the relative reduction."""
    if len(before) != len(after):
        raise ValueError(f"corpora differ in size: {len(before)} vs {len(after)}")
    mean_before = _mean([len(_tokens(q)) for q in before])
    mean_after = _mean([len(_tokens(q)) for q in after])
    reduction = 1.0 - mean_after / mean_before if mean_before else 0.0
    return {"mean_before": mean_before, "mean_after": mean_after, "reduction_fraction": reduction}


def oov_report(train, valid, m: int = 1) -> dict:
    """Validation tokens seen fewer than ``m`` times in training."""
    oov = vocabulary(map(_tokens, valid), 1) - vocabulary(map(_tokens, train), m)
    return {"oov_tokens": oov, "count": len(oov)}


def _is_value(tok: str, placeholders) -> bool:
    if placeholders is not None and tok in placeholders:
        return True
    return bool(_NUMBER.fullmatch(tok) or _PLACEHOLDER.fullmatch(tok))


def pattern_of(query, keyword_set=DEFAULT_KEYWORDS, placeholders: Optional[Iterable[str]] = None) -> str:
    """Abstract a query into its pattern.

    Keywords, operators and punctuation are kept; a double-quoted literal, a
    number or an anonymisation placeholder becomes ``VALUE``; anything else is
    ``IDENT``. Keyword lookup ignores case. Expects base (decoded) tokens.
    """
    toks = _tokens(query)
    placeholders = set(placeholders) if placeholders is not None else None
    out = []
    i = 0
    n = len(toks)
    while i < n:
        tok = toks[i]
        if tok == QUOTE:
            try:
                close = toks.index(QUOTE, i + 1)
            except ValueError:
                close = -1
            if close > 0:
                out.append(VALUE)
                i = close + 1
                continue
        if tok.upper() in keyword_set or tok in keyword_set:
            out.append(tok)
        elif _is_value(tok, placeholders):
            out.append(VALUE)
        else:
            out.append(IDENT)
        i += 1
    return " ".join(out)


def unseen_pattern_rate(train, test, keyword_set=DEFAULT_KEYWORDS) -> float:
    """Fraction of test queries whose pattern never occurs in train."""
    test = list(test)
    if not test:
        return 0.0
    seen = {pattern_of(q, keyword_set) for q in train}
    return sum(pattern_of(q, keyword_set) not in seen for q in test) / len(test)
