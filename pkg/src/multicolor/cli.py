"""Command-line entry point: build-graph, index, retrieve, find, traverse, localize, evaluate."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .codeindex import build_bm25, units_from_graph
from .config import Config, load_config
from .errors import MultiColorError
from .evaluation import evaluation_report, format_table, write_csv, write_report
from .graph import DependencyGraph, Direction, build_graph, check_invariants, find_entities, traverse
from .localizer import LocalizationResult, Variant, run_variant
from .model import EntityKind, RelationKind, dump_issues, load_issues
from .sic import IssueIndex, index_issues, retrieve_similar

log = logging.getLogger("multicolor")

GRAPH_FILE = "graph.json"
STATS_FILE = "build_stats.json"
BM25_FILE = "bm25.json"
SIC_FILE = "sic_index.json"
CORPUS_FILE = "corpus.jsonl"
RESULTS_FILE = "results.jsonl"
EVAL_FILE = "eval_report.json"
SIMILARITY_FILE = "similarity_report.json"


class UsageError(Exception):
    pass


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _out_dir(cfg: Config) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(path: Path) -> Path:
    if not path.exists():
        raise UsageError(f"missing artifact {path}")
    return path


def parse_k_range(text: str) -> list[int]:
    """``"5"`` -> [5]; ``"1..10"`` -> [1, ..., 10]; ``"1,3,5"`` -> [1, 3, 5]."""
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split("..", 1))
            ks = list(range(lo, hi + 1))
        else:
            ks = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad k specification {text!r}") from None
    if not ks or min(ks) < 1:
        raise argparse.ArgumentTypeError(f"k values must be >= 1, got {text!r}")
    return ks


def cmd_build_graph(args, cfg: Config) -> int:
    root = Path(cfg.repo_root)
    g = build_graph(root, cfg.graph_mode, component=cfg.component)
    problems = check_invariants(g)
    for p in problems:
        log.warning("invariant: %s", p)
    out = _out_dir(cfg)
    g.save(out / GRAPH_FILE)
    stats = {
        "mode": g.mode.cli_name,
        "nodes": len(g.nodes),
        "edges": len(g.edges),
        "snapshot_id": g.snapshot_id,
        "files_by_language": g.meta.get("files_by_language", {}),
        "parse_warnings": g.meta.get("parse_warnings", 0),
        "fallback_files": g.meta.get("fallback_files", []),
        "nodes_by_kind": _count(n.kind.value for n in g.nodes.values()),
        "edges_by_kind": _count(kind.value for (_, _, kind) in g.edges),
    }
    _dump_json(stats, out / STATS_FILE)
    print(f"graph: {stats['nodes']} nodes, {stats['edges']} edges, {stats['parse_warnings']} parse warnings -> {out / GRAPH_FILE}")
    return 0


def _count(items) -> dict[str, int]:
    counts: dict[str, int] = {}
    for item in items:
        counts[item] = counts.get(item, 0) + 1
    return dict(sorted(counts.items()))


def _load_graph(cfg: Config) -> DependencyGraph:
    return DependencyGraph.load(_require(Path(cfg.out) / GRAPH_FILE))


def cmd_index(args, cfg: Config) -> int:
    if not args.issues:
        raise UsageError("index needs --issues")
    out = _out_dir(cfg)
    g = _load_graph(cfg)
    bm25 = build_bm25(units_from_graph(g, cfg.repo_root), cfg.bm25_params, g.snapshot_id)
    bm25.save(out / BM25_FILE)
    issues = load_issues(args.issues)
    sic = index_issues(issues, cfg.sic, cfg.make_embedder())
    sic.save(out / SIC_FILE)
    dump_issues(sorted(issues, key=lambda i: i.id), out / CORPUS_FILE)
    print(f"indexed {bm25.N} code units and {len(sic)} issues -> {out}")
    return 0


def _load_indexes(cfg: Config):
    out = Path(cfg.out)
    from .codeindex import Bm25Index

    bm25 = Bm25Index.load(_require(out / BM25_FILE))
    sic = IssueIndex.load(_require(out / SIC_FILE), cfg.make_embedder())
    corpus = {i.id: i for i in load_issues(_require(out / CORPUS_FILE))}
    return bm25, sic, corpus


def cmd_retrieve(args, cfg: Config) -> int:
    if not args.issues:
        raise UsageError("retrieve needs --issues")
    sic = IssueIndex.load(_require(Path(cfg.out) / SIC_FILE), cfg.make_embedder())
    for q in load_issues(args.issues):
        hits = retrieve_similar(sic, q, cfg.k, cfg.make_embedder())
        print(json.dumps({"issue_id": q.id, "similar": [[i, round(s, 12)] for i, s in hits]}, sort_keys=True))
    return 0


def cmd_find(args, cfg: Config) -> int:
    g = _load_graph(cfg)
    kind = EntityKind(args.kind.upper()) if args.kind else None
    for qid in find_entities(g, args.name, kind):
        print(qid)
    return 0


def cmd_traverse(args, cfg: Config) -> int:
    g = _load_graph(cfg)
    kinds = frozenset(RelationKind(k.strip().upper()) for k in args.kinds.split(",")) if args.kinds else frozenset(RelationKind)
    sub = traverse(g, args.start, kinds, Direction(args.direction.upper()), args.hops)
    for qid, depth in sorted(sub.depth.items(), key=lambda kv: (kv[1], kv[0])):
        print(f"{depth}\t{g.nodes[qid].kind.value}\t{qid}")
    return 0


def cmd_localize(args, cfg: Config) -> int:
    if not args.issues:
        raise UsageError("localize needs --issues")
    variants = list(Variant) if args.variant == "all" else [Variant(args.variant)]
    g = _load_graph(cfg)
    bm25, sic, corpus = _load_indexes(cfg)
    embedder = cfg.make_embedder()
    lines = []
    for q in load_issues(args.issues):
        for v in variants:
            res = run_variant(v, q, g, bm25, sic, cfg, corpus, embedder)
            lines.append(json.dumps(res.to_dict(), sort_keys=True))
    out = _out_dir(cfg)
    (out / RESULTS_FILE).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    print(f"{len(lines)} results -> {out / RESULTS_FILE}")
    return 0


def cmd_evaluate(args, cfg: Config) -> int:
    if not args.issues:
        raise UsageError("evaluate needs --issues")
    out = Path(cfg.out)
    results_path = _require(Path(args.results) if args.results else out / RESULTS_FILE)
    with open(results_path, encoding="utf-8") as fh:
        results = [LocalizationResult.from_dict(json.loads(line)) for line in fh if line.strip()]
    queries = {i.id: i for i in load_issues(args.issues)}
    corpus_path = out / CORPUS_FILE
    corpus = {i.id: i for i in load_issues(corpus_path)} if corpus_path.exists() else {}
    ks = args.k_range or [1, 3, 5, 10]
    report, sim = evaluation_report(results, queries, corpus, ks, cfg.richness_threshold, cfg.verbosity_scale)
    out.mkdir(parents=True, exist_ok=True)
    write_report(report, out / EVAL_FILE)
    sim.save(out / SIMILARITY_FILE)
    if args.csv:
        write_csv(report, out / "eval_report.csv")
    print(format_table(report))
    return 0


COMMANDS = {
    "build-graph": cmd_build_graph,
    "index": cmd_index,
    "retrieve": cmd_retrieve,
    "find": cmd_find,
    "traverse": cmd_traverse,
    "localize": cmd_localize,
    "evaluate": cmd_evaluate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--root", help="repository root (config: repo_root)")
    common.add_argument("--mode", help="graph mode: mixed, python-only, cpp-only, qml-only")
    common.add_argument("--issues", help="issues in JSON-lines form")
    common.add_argument("--config", help="JSON config file (default: $MULTICOLOR_CONFIG)")
    common.add_argument("--out", help="artifact directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="multicolor", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("build-graph", parents=[common], help="parse the repository into graph.json")
    sub.add_parser("index", parents=[common], help="build bm25.json and sic_index.json")
    p = sub.add_parser("retrieve", parents=[common], help="print similar historical issues")
    p.add_argument("--k", type=int)
    p = sub.add_parser("find", parents=[common], help="look up entities by name")
    p.add_argument("name")
    p.add_argument("--kind", choices=[k.value.lower() for k in EntityKind])
    p = sub.add_parser("traverse", parents=[common], help="breadth-first neighbourhood of a node")
    p.add_argument("start")
    p.add_argument("--hops", type=int, default=1)
    p.add_argument("--direction", default="both", choices=[d.value.lower() for d in Direction])
    p.add_argument("--kinds", help="comma-separated relation kinds")
    p = sub.add_parser("localize", parents=[common], help="rank candidate fix files")
    p.add_argument("--k", type=int)
    p.add_argument("--variant", default="full", choices=[v.value for v in Variant] + ["all"])
    p = sub.add_parser("evaluate", parents=[common], help="score results.jsonl")
    p.add_argument("--k", dest="k_range", type=parse_k_range, help="e.g. 5, 1..10 or 1,3,5")
    p.add_argument("--results", help="results file (default: <out>/results.jsonl)")
    p.add_argument("--csv", action="store_true", help="also write eval_report.csv")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(
            args.config,
            repo_root=args.root,
            mode=args.mode,
            out=args.out,
            k=getattr(args, "k", None),
        )
        return COMMANDS[args.command](args, cfg)
    except (MultiColorError, UsageError, ValueError, KeyError, OSError) as exc:
        print(f"multicolor {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
