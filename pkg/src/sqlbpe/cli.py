"""Command-line interface: ingest, train, encode, decode, stats."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import codec, metrics
from .bpetrain import AST, PLAIN, TrainerConfig, train
from .corpus import (Corpus, CorpusError, DatasetError, ROLES, build_split, load_dataset_json,
                     load_plaintext, vocabulary, write_plaintext)
from .sqlast import SqlSyntaxError, parse

log = logging.getLogger("sqlbpe")

EXIT_DATA = 2
EXIT_PARSE = 3
EXIT_DECODE = 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_DATA):
        super().__init__(message)
        self.code = code


def _fold_map(items):
    mapping = {}
    for item in items or ():
        key, sep, role = item.partition("=")
        if not sep:
            raise CliError(f"--fold expects KEY=ROLE, got {item!r}")
        mapping[key] = role
    return mapping


def _load(path, role="train", allow_merged=False) -> Corpus:
    try:
        return load_plaintext(path, role, allow_merged)
    except CorpusError as exc:
        raise CliError(str(exc), EXIT_DATA) from exc


def _load_table(path) -> codec.MergeTable:
    try:
        return codec.load_table(path)
    except codec.TableFormatError as exc:
        raise CliError(f"{path}: {exc}", EXIT_DATA) from exc


def _parse_all(corpus: Corpus, name: str):
    trees = []
    for i, q in enumerate(corpus):
        try:
            trees.append(parse(q.tokens))
        except SqlSyntaxError as exc:
            raise CliError(f"{name}: query {i} (line {q.source_id}): {exc}", EXIT_PARSE) from exc
    return trees


def cmd_ingest(args) -> None:
    try:
        records = load_dataset_json(args.json)
        parts = build_split(records, args.split, args.anonymize, _fold_map(args.fold))
    except DatasetError as exc:
        raise CliError(str(exc), EXIT_DATA) from exc
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for role, corpus in zip(ROLES, parts):
        write_plaintext(corpus, out / f"{role}.txt")
        log.info("%s: %d queries", role, len(corpus))


def cmd_train(args) -> None:
    tr = _load(args.train, "train")
    va = _load(args.valid, "valid")
    config = TrainerConfig(r=args.r, m=args.m, mode=args.mode, max_steps=args.max_steps)
    train_trees = valid_trees = None
    if args.mode == AST:
        train_trees = _parse_all(tr, "train")
        valid_trees = _parse_all(va, "valid")
    table, report, enc_train, enc_valid = train(tr, va, config, train_trees, valid_trees)
    codec.save_table(table, args.out)
    log.info("%d rules, %d rejected, stop=%s", len(report.accepted), len(report.rejected),
             report.stop_reason)
    if args.report:
        payload = {"config": {"r": config.r, "m": config.m, "mode": config.mode,
                              "max_steps": config.max_steps}}
        payload.update(report.to_dict())
        payload["oov_after"] = metrics.oov_report(
            [[t.text for t in q] for q in enc_train],
            [[t.text for t in q] for q in enc_valid], config.m)["count"]
        Path(args.report).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")


def cmd_encode(args) -> None:
    table = _load_table(args.table)
    write_plaintext(codec.encode(_load(args.inp), table), args.out)


def cmd_decode(args) -> None:
    table = _load_table(args.table)
    try:
        decoded = codec.decode(_load(args.inp, allow_merged=True), table)
    except codec.CodecError as exc:
        raise CliError(str(exc), EXIT_DECODE) from exc
    write_plaintext(decoded, args.out)


def collect_stats(tr: Corpus, va=None, te=None, table=None, m: int = 1) -> dict:
    stats = {
        "train_queries": len(tr),
        "vocab_size": len(vocabulary(tr, 1)),
        "vocab_size_all": len(vocabulary([q for c in (tr, va, te) if c for q in c], 1)),
    }
    if table is None:
        table = codec.MergeTable()
    stats["merge_rules"] = len(table)
    enc_train = codec.encode(tr, table)
    stats.update(metrics.length_stats(tr, enc_train))
    if va is not None:
        oov = metrics.oov_report(tr, va, m)
        stats["m"] = m
        stats["oov_count"] = oov["count"]
        stats["oov_tokens"] = sorted(oov["oov_tokens"])
        stats["encoded_oov_count"] = metrics.oov_report(enc_train, codec.encode(va, table), m)["count"]
    if te is not None:
        stats["test_queries"] = len(te)
        stats["unseen_pattern_rate"] = metrics.unseen_pattern_rate(tr, te)
    return stats


def _format_value(value) -> str:
    if isinstance(value, list):
        return " ".join(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def cmd_stats(args) -> None:
    tr = _load(args.train, "train")
    va = _load(args.valid, "valid") if args.valid else None
    te = _load(args.test, "test") if args.test else None
    if args.dump_ast:
        for name, corpus in (("train", tr), ("valid", va), ("test", te)):
            if corpus is None:
                continue
            for tree in _parse_all(corpus, name):
                print(tree.to_sexpr())
        return
    table = _load_table(args.table) if args.table else None
    stats = collect_stats(tr, va, te, table, args.m)
    if args.json:
        print(json.dumps(stats, sort_keys=True))
    else:
        for key in sorted(stats):
            print(f"{key}={_format_value(stats[key])}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sqlbpe", description="Token-level BPE for SQL corpora.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="split a JSON text-to-SQL dataset into corpus files")
    p.add_argument("--json", required=True)
    p.add_argument("--split", choices=["question", "query"], required=True)
    p.add_argument("--anonymize", action="store_true")
    p.add_argument("--fold", action="append", metavar="KEY=ROLE",
                   help="map a numeric split id to train/valid/test (repeatable)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="learn a merge table")
    p.add_argument("--train", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--mode", choices=[PLAIN, AST], default=PLAIN)
    p.add_argument("-r", type=int, default=20, help="retention steps")
    p.add_argument("-m", type=int, default=100, help="minimum training count")
    p.add_argument("--max-steps", type=int, default=10_000)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_train)

    for name, func in (("encode", cmd_encode), ("decode", cmd_decode)):
        p = sub.add_parser(name, help=f"{name} a corpus file with a merge table")
        p.add_argument("--table", required=True)
        p.add_argument("--in", dest="inp", required=True)
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("stats", help="corpus statistics")
    p.add_argument("--train", required=True)
    p.add_argument("--valid")
    p.add_argument("--test")
    p.add_argument("--table")
    p.add_argument("-m", type=int, default=1, help="minimum count for the OOV report")
    p.add_argument("--json", action="store_true")
    p.add_argument("--dump-ast", action="store_true")
    p.set_defaults(func=cmd_stats)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        args.func(args)
    except CliError as exc:
        print(f"sqlbpe: error: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:
        print(f"sqlbpe: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
