"""Deterministic localization policy driven by similar-issue cues, BM25 and graph expansion."""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Optional

from .codeindex import Bm25Index, code_terms, query_files, tokenize_identifiers
from .config import Config
from .errors import FingerprintMismatch, IndexMismatch
from .graph import DependencyGraph, Direction, Subgraph, find_entities, traverse
from .model import EntityKind, Issue, RelationKind, path_has_prefix
from .sic import Embedder, IssueIndex, SicCue, Summarizer, extract_cues, retrieve_similar

TOOLS = ("sic_retrieve", "graph_find", "graph_traverse", "bm25_query", "read_entity")


class Provenance(str, Enum):
    SIC_FILE = "SIC_FILE"
    SIC_DIR = "SIC_DIR"
    BM25 = "BM25"
    GRAPH_EXPAND = "GRAPH_EXPAND"


class Variant(str, Enum):
    CODE_SEARCH = "code-search"
    SIC_PLUS_CODE_SEARCH = "sic-code-search"
    GRAPH_ONLY = "graph-only"
    FULL = "full"

    @property
    def uses_sic(self) -> bool:
        return self in (Variant.FULL, Variant.SIC_PLUS_CODE_SEARCH)

    @property
    def uses_graph(self) -> bool:
        return self in (Variant.FULL, Variant.GRAPH_ONLY)


@dataclass(frozen=True)
class LedgerEntry:
    tool: str
    args_digest: str
    tick: int


class ToolRegistry:
    """The localization tool surface; every call is appended to ``call_ledger``."""

    def __init__(
        self,
        graph: Optional[DependencyGraph],
        bm25: Bm25Index,
        sic: Optional[IssueIndex] = None,
        corpus: Optional[Mapping[str, Issue]] = None,
        embedder: Optional[Embedder] = None,
        summarizer: Optional[Summarizer] = None,
        repo_root: Optional[str] = None,
    ):
        self.graph = graph
        self.bm25 = bm25
        self.sic = sic
        self.corpus = corpus or {}
        self.embedder = embedder
        self.summarizer = summarizer
        self.repo_root = repo_root
        self.call_ledger: list[LedgerEntry] = []
        self.counters: Counter = Counter()

    def _record(self, tool: str, **args: Any) -> None:
        digest = hashlib.sha256(json.dumps(args, sort_keys=True, default=str).encode()).hexdigest()[:12]
        self.call_ledger.append(LedgerEntry(tool, digest, len(self.call_ledger)))
        self.counters[tool] += 1

    def sic_retrieve(self, issue: Issue, k: int) -> list[tuple[str, float]]:
        self._record("sic_retrieve", issue=issue.id, k=k)
        if self.sic is None:
            return []
        return retrieve_similar(self.sic, issue, k, self.embedder, self.summarizer)

    def graph_find(self, name: str, kind: Optional[EntityKind] = None) -> list[str]:
        self._record("graph_find", name=name, kind=kind.value if kind else None)
        return find_entities(self.graph, name, kind) if self.graph is not None else []

    def graph_traverse(self, start: str, kinds, direction: Direction, hops: int) -> Subgraph:
        self._record("graph_traverse", start=start, kinds=sorted(k.value for k in kinds), direction=direction.value, hops=hops)
        return traverse(self.graph, start, kinds, direction, hops)

    def bm25_query(self, tokens: list[str], top_n: int, scope: Optional[list[str]]) -> list[tuple[str, float]]:
        self._record("bm25_query", tokens=tokens, top_n=top_n, scope=scope)
        return query_files(self.bm25, tokens, top_n, scope)

    def read_entity(self, qid: str) -> str:
        """Source lines of an entity (whole text for files); empty when unavailable."""
        self._record("read_entity", qid=qid)
        if self.graph is None or self.repo_root is None or qid not in self.graph.nodes:
            return ""
        from pathlib import Path

        node = self.graph.nodes[qid]
        comp = self.graph.component
        rel = node.path[len(comp) + 1 :] if comp and node.path.startswith(comp + "/") else node.path
        try:
            lines = (Path(self.repo_root) / rel).read_text(encoding="utf-8", errors="replace").splitlines()
        except OSError:
            return ""
        if node.kind is EntityKind.FILE:
            return "\n".join(lines)
        start, end = node.attrs.get("span", [1, len(lines)])
        return "\n".join(lines[start - 1 : end])


@dataclass
class RankedFile:
    path: str
    score: float
    provenance: list[Provenance]


@dataclass
class LocalizationResult:
    issue_id: str
    variant: Variant
    ranked_files: list[RankedFile]
    tool_calls: int
    scope_used: list[str]
    similar_issues: list[tuple[str, float]] = field(default_factory=list)
    tool_counts: dict[str, int] = field(default_factory=dict)

    @property
    def files(self) -> list[str]:
        return [r.path for r in self.ranked_files]

    def to_dict(self) -> dict[str, Any]:
        return {
            "issue_id": self.issue_id,
            "variant": self.variant.value,
            "ranked_files": [
                {"path": r.path, "score": round(r.score, 12), "provenance": [p.value for p in r.provenance]}
                for r in self.ranked_files
            ],
            "tool_calls": self.tool_calls,
            "tool_counts": dict(sorted(self.tool_counts.items())),
            "scope_used": self.scope_used,
            "similar_issues": [[i, round(s, 12)] for i, s in self.similar_issues],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "LocalizationResult":
        return cls(
            issue_id=data["issue_id"],
            variant=Variant(data["variant"]),
            ranked_files=[
                RankedFile(r["path"], r["score"], [Provenance(p) for p in r["provenance"]])
                for r in data["ranked_files"]
            ],
            tool_calls=data["tool_calls"],
            scope_used=list(data["scope_used"]),
            similar_issues=[(i, s) for i, s in data.get("similar_issues", [])],
            tool_counts=dict(data.get("tool_counts", {})),
        )


def _cue_scope(cue: SicCue, graph: Optional[DependencyGraph]) -> Optional[list[str]]:
    """Deepest cue directories present in the graph, else cue components, else None (whole repo)."""
    present = (lambda p: p in graph.nodes) if graph is not None else (lambda p: True)
    dirs = sorted(d for d in cue.candidate_directories if present(d))
    deepest = [d for d in dirs if not any(o != d and path_has_prefix(o, d) for o in dirs)]
    if deepest:
        return deepest
    comps = sorted(c for c in cue.candidate_components if present(c))
    return comps or None


def _minmax(scores: list[tuple[str, float]]) -> dict[str, float]:
    if not scores:
        return {}
    lo = min(s for _, s in scores)
    hi = max(s for _, s in scores)
    if hi == lo:
        return {f: 1.0 for f, _ in scores}
    return {f: (s - lo) / (hi - lo) for f, s in scores}


def _check_snapshot(graph: Optional[DependencyGraph], bm25: Bm25Index) -> None:
    if graph is not None and bm25.snapshot_id and graph.snapshot_id and bm25.snapshot_id != graph.snapshot_id:
        raise IndexMismatch(f"BM25 index snapshot {bm25.snapshot_id} != graph snapshot {graph.snapshot_id}")


def run_variant(
    variant: Variant | str,
    issue: Issue,
    graph: Optional[DependencyGraph],
    bm25: Bm25Index,
    sic: Optional[IssueIndex],
    config: Config,
    corpus: Optional[Mapping[str, Issue]] = None,
    embedder: Optional[Embedder] = None,
    summarizer: Optional[Summarizer] = None,
) -> LocalizationResult:
    """Execute one arm of the localization policy and return its ranked files.

    FULL: similar-issue cues restrict the BM25 scope, the top BM25 files are
    expanded one hop over IMPORTS/CONTAINS, and the three signals are mixed
    with the configured weights.
    """
    variant = Variant(variant)
    _check_snapshot(graph, bm25)
    if variant.uses_graph and graph is None:
        raise ValueError(f"variant {variant.value} needs a dependency graph")
    tools = ToolRegistry(graph, bm25, sic, corpus, embedder or config.make_embedder(), summarizer, config.repo_root)
    known_files = set(graph.files()) if graph is not None else set(bm25.unit_files.values())

    sic_score: dict[str, float] = {}
    scope: Optional[list[str]] = None
    retrieved: list[tuple[str, float]] = []
    if variant.uses_sic:
        try:
            retrieved = tools.sic_retrieve(issue, config.k)
        except FingerprintMismatch as exc:
            raise IndexMismatch(str(exc)) from exc
        cue = extract_cues(retrieved, corpus or {}, summarizer)
        top = max(cue.candidate_files.values(), default=0)
        sic_score = {f: n / top for f, n in cue.candidate_files.items() if f in known_files}
        scope = _cue_scope(cue, graph)

    tokens = tokenize_identifiers(issue.title + "\n" + issue.description)
    bm25_hits = tools.bm25_query(tokens, config.bm25_top_units, scope) if tokens else []
    bm25_score = _minmax(bm25_hits)

    graph_bonus: dict[str, float] = {}
    if variant.uses_graph:
        kinds = frozenset({RelationKind.IMPORTS, RelationKind.CONTAINS})
        for f, _ in bm25_hits[: config.frontier]:
            sub = tools.graph_traverse(f, kinds, Direction.BOTH, 1)
            for qid in sub.depth:
                nf = graph.file_of(qid)
                if nf is not None and nf != f:
                    graph_bonus[nf] = 1.0
        if variant is Variant.GRAPH_ONLY:
            # without cues the search falls back on entity lookups for identifiers in the report
            for term in sorted(set(code_terms(issue.title + " " + issue.description)))[: config.frontier]:
                for qid in tools.graph_find(term):
                    nf = graph.file_of(qid)
                    if nf is not None:
                        graph_bonus[nf] = 1.0

    w_sic = config.w_sic if variant.uses_sic else 0.0
    w_graph = config.w_graph if variant.uses_graph else 0.0
    candidates = sorted(set(sic_score) | set(bm25_score) | set(graph_bonus))
    ranked = []
    for f in candidates:
        prov = []
        if f in sic_score:
            prov.append(Provenance.SIC_FILE)
        if scope is not None and any(path_has_prefix(f, p) for p in scope):
            prov.append(Provenance.SIC_DIR)
        if f in bm25_score:
            prov.append(Provenance.BM25)
        if f in graph_bonus:
            prov.append(Provenance.GRAPH_EXPAND)
        score = w_sic * sic_score.get(f, 0.0) + config.w_bm25 * bm25_score.get(f, 0.0) + w_graph * graph_bonus.get(f, 0.0)
        ranked.append(RankedFile(f, score, prov))
    ranked.sort(key=lambda r: (-r.score, r.path))

    if scope is None:
        scope_used = [graph.component] if graph is not None and graph.component else []
    else:
        scope_used = scope
    return LocalizationResult(
        issue_id=issue.id,
        variant=variant,
        ranked_files=ranked[: config.max_results],
        tool_calls=len(tools.call_ledger),
        scope_used=scope_used,
        similar_issues=retrieved,
        tool_counts=dict(tools.counters),
    )


def localize(
    issue: Issue,
    graph: DependencyGraph,
    bm25: Bm25Index,
    sic: IssueIndex,
    config: Config,
    corpus: Optional[Mapping[str, Issue]] = None,
    embedder: Optional[Embedder] = None,
    summarizer: Optional[Summarizer] = None,
) -> LocalizationResult:
    return run_variant(Variant.FULL, issue, graph, bm25, sic, config, corpus, embedder, summarizer)


def localize_baseline(issue: Issue, bm25: Bm25Index, config: Config) -> LocalizationResult:
    """Lexical search over the whole repository, no cues and no graph."""
    return run_variant(Variant.CODE_SEARCH, issue, None, bm25, None, config)


def ablation_variants(
    issue: Issue,
    graph: DependencyGraph,
    bm25: Bm25Index,
    sic: IssueIndex,
    config: Config,
    corpus: Optional[Mapping[str, Issue]] = None,
    embedder: Optional[Embedder] = None,
    summarizer: Optional[Summarizer] = None,
) -> dict[Variant, LocalizationResult]:
    return {
        v: run_variant(v, issue, graph, bm25, sic, config, corpus, embedder, summarizer)
        for v in Variant
    }
