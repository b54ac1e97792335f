"""Token-level BPE training with a validation-driven stopping rule.

Each candidate merge (the most frequent pair in the training corpus) is
accepted only if it does not increase the number of validation tokens that
occur fewer than ``m`` times in the training corpus. Rejected candidates are
blacklisted; training stops after ``r`` rejections, when no candidate pair is
left, or after ``max_steps`` accepted merges.

In ``ast`` mode a pair occurrence only counts (and is only replaced) when the
two tokens together cover consecutive siblings of one parse-tree node.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

from .corpus import Corpus, vocabulary
from .codec import MergeRule, MergeTable, merged_name
from .sqlast import AstTree

Pair = Tuple[str, str]

PLAIN = "plain"
AST = "ast"

RETENTION_EXHAUSTED = "retention_exhausted"
NO_BIGRAMS = "no_bigrams"
MAX_STEPS = "max_steps"


class WorkingToken(NamedTuple):
    text: str
    start: int
    end: int


WorkingQuery = List[WorkingToken]


@dataclass(frozen=True)
class TrainerConfig:
    r: int = 20
    m: int = 100
    mode: str = PLAIN
    max_steps: Optional[int] = 10_000

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("r must be >= 0")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.mode not in (PLAIN, AST):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass
class TrainReport:
    accepted: List[MergeRule] = field(default_factory=list)
    # (left, right, number of rules accepted before the rejection)
    rejected: List[Tuple[str, str, int]] = field(default_factory=list)
    stop_reason: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "accepted": [[r.left, r.right, r.merged, r.step_index] for r in self.accepted],
            "rejected": [list(x) for x in self.rejected],
            "stop_reason": self.stop_reason,
        }


def to_working(corpus) -> List[WorkingQuery]:
    return [[WorkingToken(t, i, i) for i, t in enumerate(q)] for q in corpus]


def from_working(queries: Iterable[WorkingQuery], role: str = "train") -> Corpus:
    return Corpus.from_tokens(([t.text for t in q] for q in queries), role)


def _query_pair_counts(query: WorkingQuery, tree: Optional[AstTree]) -> Counter:
    # Non-overlapping left-to-right counting. Only identical-token pairs can
    # overlap, and only with the occurrence directly before them.
    counts: Counter = Counter()
    taken_prev = False
    for i in range(len(query) - 1):
        a, b = query[i], query[i + 1]
        if taken_prev and a.text == b.text and query[i - 1].text == a.text:
            taken_prev = False
            continue
        if tree is not None and not tree.is_aligned(a.start, b.end):
            taken_prev = False
            continue
        counts[(a.text, b.text)] += 1
        taken_prev = True
    return counts


def _replace_in_query(query: WorkingQuery, pair: Pair, merged: str,
                      tree: Optional[AstTree]) -> Tuple[WorkingQuery, int]:
    left, right = pair
    out: WorkingQuery = []
    n = len(query)
    i = 0
    hits = 0
    while i < n:
        tok = query[i]
        if i + 1 < n and tok.text == left and query[i + 1].text == right \
                and (tree is None or tree.is_aligned(tok.start, query[i + 1].end)):
            out.append(WorkingToken(merged, tok.start, query[i + 1].end))
            hits += 1
            i += 2
        else:
            out.append(tok)
            i += 1
    return out, hits


def _trees_for(queries, trees):
    return trees if trees is not None else [None] * len(queries)


def pair_counts(queries: Sequence[WorkingQuery], trees: Optional[Sequence[AstTree]] = None) -> Counter:
    """Adjacent-pair counts over a working corpus.

    Pass ``trees`` (one per query) to restrict counting to tree-aligned
    occurrences.
    """
    total: Counter = Counter()
    for q, t in zip(queries, _trees_for(queries, trees)):
        total.update(_query_pair_counts(q, t))
    return total


def pair_with_max_count(counts, blacklist=frozenset()) -> Optional[Pair]:
    """Most frequent non-blacklisted pair; ties go to the smallest (left, right)."""
    best = None
    best_count = 0
    for pair, c in counts.items():
        if c < 1 or pair in blacklist:
            continue
        if c > best_count or (c == best_count and pair < best):
            best, best_count = pair, c
    return best


def replace_pair(train: Sequence[WorkingQuery], valid: Sequence[WorkingQuery], pair: Pair,
                 merged: Optional[str] = None, train_trees=None, valid_trees=None):
    """Replace occurrences of ``pair`` in both corpora; returns new corpora."""
    merged = merged or merged_name(*pair)
    new_train = [_replace_in_query(q, pair, merged, t)[0]
                 for q, t in zip(train, _trees_for(train, train_trees))]
    new_valid = [_replace_in_query(q, pair, merged, t)[0]
                 for q, t in zip(valid, _trees_for(valid, valid_trees))]
    return new_train, new_valid


def oov_count(train, valid, m: int) -> int:
    """|vocabulary(valid, 1) - vocabulary(train, m)|."""
    def texts(qs):
        return ([getattr(t, "text", t) for t in q] for q in qs)
    return len(vocabulary(texts(valid), 1) - vocabulary(texts(train), m))


def adds_new_oov(train, valid, pair: Pair, m: int, train_trees=None, valid_trees=None) -> bool:
    before = oov_count(train, valid, m)
    new_train, new_valid = replace_pair(train, valid, pair, None, train_trees, valid_trees)
    return oov_count(new_train, new_valid, m) > before


class _Side:
    """Incrementally maintained counts for one corpus."""

    def __init__(self, queries: List[WorkingQuery], trees):
        self.queries = queries
        self.trees = _trees_for(queries, trees)
        self.token_counts: Counter = Counter()
        self.pair_counts: Counter = Counter()
        self.query_pairs: List[Counter] = []
        self.index: Dict[Pair, Set[int]] = {}
        for qid, q in enumerate(queries):
            self.token_counts.update(t.text for t in q)
            pc = _query_pair_counts(q, self.trees[qid])
            self.query_pairs.append(pc)
            self.pair_counts.update(pc)
            for p in pc:
                self.index.setdefault(p, set()).add(qid)

    def occurrences(self, pair: Pair) -> int:
        return self.pair_counts.get(pair, 0)

    def apply(self, pair: Pair, merged: str) -> None:
        for qid in sorted(self.index.get(pair, ())):
            new_q, hits = _replace_in_query(self.queries[qid], pair, merged, self.trees[qid])
            if not hits:
                continue
            self.queries[qid] = new_q
            old_pc = self.query_pairs[qid]
            new_pc = _query_pair_counts(new_q, self.trees[qid])
            self.pair_counts.subtract(old_pc)
            self.pair_counts.update(new_pc)
            for p in old_pc.keys() - new_pc.keys():
                self.index.get(p, set()).discard(qid)
            for p in new_pc.keys() - old_pc.keys():
                self.index.setdefault(p, set()).add(qid)
            self.query_pairs[qid] = new_pc
            self.token_counts[pair[0]] -= hits
            self.token_counts[pair[1]] -= hits
            self.token_counts[merged] += hits
        for p in [p for p, c in self.pair_counts.items() if c <= 0]:
            del self.pair_counts[p]
            self.index.pop(p, None)


def _token_deltas(pair: Pair, merged: str, hits: int) -> Dict[str, int]:
    delta: Dict[str, int] = Counter()
    delta[pair[0]] -= hits
    delta[pair[1]] -= hits
    delta[merged] += hits
    return delta


class _Trainer:
    def __init__(self, train, valid, config: TrainerConfig, train_trees, valid_trees):
        self.config = config
        self.train = _Side(to_working(train), train_trees)
        self.valid = _Side(to_working(valid), valid_trees)

    def _is_oov(self, tok: str, train_counts, valid_counts) -> bool:
        return valid_counts.get(tok, 0) >= 1 and train_counts.get(tok, 0) < self.config.m

    def adds_new_oov(self, pair: Pair, merged: str) -> bool:
        # Only the counts of the pair's tokens and the merged token change.
        touched = {pair[0], pair[1], merged}
        t_delta = _token_deltas(pair, merged, self.train.occurrences(pair))
        v_delta = _token_deltas(pair, merged, self.valid.occurrences(pair))
        tc, vc = self.train.token_counts, self.valid.token_counts
        before = sum(self._is_oov(t, tc, vc) for t in touched)
        after = 0
        for t in touched:
            after += (vc.get(t, 0) + v_delta.get(t, 0) >= 1
                      and tc.get(t, 0) + t_delta.get(t, 0) < self.config.m)
        return after > before

    def run(self) -> TrainReport:
        cfg = self.config
        report = TrainReport()
        blacklist: Set[Pair] = set()
        while True:
            if len(report.rejected) >= cfg.r:
                report.stop_reason = RETENTION_EXHAUSTED
                break
            if cfg.max_steps is not None and len(report.accepted) >= cfg.max_steps:
                report.stop_reason = MAX_STEPS
                break
            pair = pair_with_max_count(self.train.pair_counts, blacklist)
            if pair is None:
                report.stop_reason = NO_BIGRAMS
                break
            merged = merged_name(*pair)
            if self.adds_new_oov(pair, merged):
                blacklist.add(pair)
                report.rejected.append((pair[0], pair[1], len(report.accepted)))
                continue
            report.accepted.append(MergeRule(pair[0], pair[1], merged, len(report.accepted)))
            self.train.apply(pair, merged)
            self.valid.apply(pair, merged)
        return report


def train(train_corpus, valid_corpus, config: Optional[TrainerConfig] = None,
          train_trees: Optional[Sequence[AstTree]] = None,
          valid_trees: Optional[Sequence[AstTree]] = None):
    """Learn a merge table from a training and a validation corpus.

    Returns ``(table, report, encoded_train, encoded_valid)``. The encoded
    corpora are lists of :class:`WorkingToken` lists, so token spans over
    the original queries stay available.
    """
    config = config or TrainerConfig()
    if config.mode == AST:
        if train_trees is None or valid_trees is None:
            raise ValueError("ast mode needs parse trees for both corpora")
        if len(train_trees) != len(train_corpus) or len(valid_trees) != len(valid_corpus):
            raise ValueError("one parse tree per query is required")
    else:
        train_trees = valid_trees = None
    trainer = _Trainer(train_corpus, valid_corpus, config, train_trees, valid_trees)
    report = trainer.run()
    base = frozenset(vocabulary(train_corpus, 1) | vocabulary(valid_corpus, 1))
    table = MergeTable(list(report.accepted), base, mode=config.mode, r=config.r, m=config.m)
    return table, report, trainer.train.queries, trainer.valid.queries
