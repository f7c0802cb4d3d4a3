"""Identifier tokenization, code-term counting and an Okapi BM25 index over code units."""

from __future__ import annotations

import json
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional

from .errors import DuplicateUnit, IoError
from .graph import DependencyGraph
from .model import EntityKind, path_has_prefix

_WORD = re.compile(r"\w+")
_SUBTOKEN = re.compile(r"[A-Z]+(?![a-z])|[A-Z]?[a-z]+|\d+")
_SNAKE = re.compile(r"[A-Za-z0-9]_[A-Za-z0-9]")
_CAMEL = re.compile(r"[a-z][A-Z]")
_EDGE_PUNCT = re.compile(r"^[^\w]+|[^\w]+$")

INDEXED_KINDS = (EntityKind.FILE, EntityKind.CLASS, EntityKind.FUNCTION, EntityKind.QML_COMPONENT)


def tokenize_identifiers(text: str) -> list[str]:
    """Lowercased identifier tokens, each compound followed by its subtokens.

    >>> tokenize_identifiers("HTTPServer2")
    ['httpserver2', 'http', 'server', '2']
    """
    out: list[str] = []
    for word in _WORD.findall(text or ""):
        word = word.strip("_")
        if not word:
            continue
        subs = [s.lower() for part in word.split("_") for s in _SUBTOKEN.findall(part)]
        compound = word.lower()
        out.append(compound)
        if subs != [compound]:
            out.extend(subs)
    return out


def is_code_term(token: str) -> bool:
    token = _EDGE_PUNCT.sub("", token)
    if not any(c.isalpha() for c in token):
        return False
    return bool(_SNAKE.search(token) or _CAMEL.search(token))


def count_code_terms(text: str) -> int:
    """Whitespace tokens shaped like snake_case or CamelCase identifiers."""
    return sum(1 for tok in (text or "").split() if is_code_term(tok))


def code_terms(text: str) -> list[str]:
    return [_EDGE_PUNCT.sub("", tok) for tok in (text or "").split() if is_code_term(tok)]


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75


@dataclass
class IndexableUnit:
    unit_id: str
    file: str
    kind: EntityKind
    text: list[str]


@dataclass
class Bm25Index:
    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    unit_files: dict[str, str]
    unit_kinds: dict[str, EntityKind]
    params: Bm25Params = field(default_factory=Bm25Params)
    snapshot_id: str = ""

    @property
    def N(self) -> int:
        return len(self.doc_lengths)

    @property
    def avg_doc_length(self) -> float:
        return sum(self.doc_lengths.values()) / self.N if self.N else 0.0

    def idf(self, term: str) -> float:
        n = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.N - n + 0.5) / (n + 0.5))

    def to_dict(self) -> dict[str, Any]:
        return {
            "params": {"k1": self.params.k1, "b": self.params.b},
            "snapshot_id": self.snapshot_id,
            "units": {
                u: {"file": self.unit_files[u], "kind": self.unit_kinds[u].value, "length": self.doc_lengths[u]}
                for u in sorted(self.doc_lengths)
            },
            "postings": {t: [[u, tf] for u, tf in p] for t, p in sorted(self.postings.items())},
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Bm25Index":
        units = data["units"]
        return cls(
            postings={t: [(u, tf) for u, tf in p] for t, p in data["postings"].items()},
            doc_lengths={u: v["length"] for u, v in units.items()},
            unit_files={u: v["file"] for u, v in units.items()},
            unit_kinds={u: EntityKind(v["kind"]) for u, v in units.items()},
            params=Bm25Params(**data["params"]),
            snapshot_id=data.get("snapshot_id", ""),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Bm25Index":
        try:
            return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
        except OSError as exc:
            raise IoError(f"cannot read index {path}: {exc}") from exc


def build_bm25(
    units: Iterable[IndexableUnit], params: Optional[Bm25Params] = None, snapshot_id: str = ""
) -> Bm25Index:
    postings: dict[str, list[tuple[str, int]]] = defaultdict(list)
    lengths: dict[str, int] = {}
    files: dict[str, str] = {}
    kinds: dict[str, EntityKind] = {}
    for unit in sorted(units, key=lambda u: u.unit_id):
        if unit.unit_id in lengths:
            raise DuplicateUnit(unit.unit_id)
        lengths[unit.unit_id] = len(unit.text)
        files[unit.unit_id] = unit.file
        kinds[unit.unit_id] = unit.kind
        for term, tf in sorted(Counter(unit.text).items()):
            postings[term].append((unit.unit_id, tf))
    return Bm25Index(dict(sorted(postings.items())), lengths, files, kinds, params or Bm25Params(), snapshot_id)


def _in_scope(path: str, scope: Optional[Iterable[str]]) -> bool:
    return scope is None or any(path_has_prefix(path, p) for p in scope)


def score_units(idx: Bm25Index, query: list[str], scope: Optional[Iterable[str]] = None) -> dict[str, float]:
    """BM25 score of every in-scope unit that contains at least one query term."""
    if scope is not None:
        scope = [str(p).rstrip("/") for p in scope]
    k1, b = idx.params.k1, idx.params.b
    avgdl = idx.avg_doc_length or 1.0
    scores: dict[str, float] = defaultdict(float)
    for term in query:
        plist = idx.postings.get(term)
        if not plist:
            continue
        idf = idx.idf(term)
        for unit_id, tf in plist:
            if not _in_scope(idx.unit_files[unit_id], scope):
                continue
            norm = k1 * (1.0 - b + b * idx.doc_lengths[unit_id] / avgdl)
            scores[unit_id] += idf * tf * (k1 + 1.0) / (tf + norm)
    return dict(scores)


def query_bm25(
    idx: Bm25Index, query: list[str], top_n: int = 10, scope: Optional[Iterable[str]] = None
) -> list[tuple[str, float]]:
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    scores = score_units(idx, query, scope)
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]


def query_files(
    idx: Bm25Index, query: list[str], top_n: int = 10, scope: Optional[Iterable[str]] = None
) -> list[tuple[str, float]]:
    """Rank files by the best score of any unit they contain."""
    best: dict[str, float] = {}
    for unit_id, score in score_units(idx, query, scope).items():
        f = idx.unit_files[unit_id]
        if score > best.get(f, -1.0):
            best[f] = score
    return sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))[:top_n]


def units_from_graph(g: DependencyGraph, root: str | Path) -> list[IndexableUnit]:
    """One unit per FILE plus one per class, function and QML component.

    File units index the path and the whole text; entity units index the
    entity name and the source lines of its span.
    """
    root = Path(root)
    component = g.component
    lines_cache: dict[str, list[str]] = {}

    def lines(file_id: str) -> list[str]:
        if file_id not in lines_cache:
            rel = file_id[len(component) + 1 :] if component and file_id.startswith(component + "/") else file_id
            try:
                text = (root / rel).read_text(encoding="utf-8", errors="replace")
            except OSError as exc:
                raise IoError(f"cannot read {file_id} under {root}: {exc}") from exc
            lines_cache[file_id] = text.splitlines()
        return lines_cache[file_id]

    units = []
    for qid in sorted(g.nodes):
        node = g.nodes[qid]
        if node.kind not in INDEXED_KINDS:
            continue
        if node.kind is EntityKind.FILE:
            text = qid + "\n" + "\n".join(lines(qid))
        else:
            start, end = node.attrs.get("span", [1, 1])
            text = node.name + "\n" + "\n".join(lines(node.path)[start - 1 : end])
        units.append(IndexableUnit(qid, node.path, node.kind, tokenize_identifiers(text)))
    return units
