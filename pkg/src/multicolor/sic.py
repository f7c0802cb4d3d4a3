"""Similar-issue retrieval: issue text construction, embedding, filtered top-k search, cue extraction."""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Protocol

import numpy as np

from .codeindex import tokenize_identifiers
from .errors import DimensionMismatch, DuplicateIssueId, FingerprintMismatch, IoError, UnknownIssue
from .model import Issue

DEFAULT_K = 5
# cosines are rounded to this many decimals; equal values tie and fall back to issue id
TIE_DECIMALS = 12


class SicMode(str, Enum):
    EMBED = "EMBED"
    SUMM = "SUMM"


class Embedder(Protocol):
    dim: int
    fingerprint: str

    def embed(self, text: str) -> np.ndarray: ...


class Summarizer(Protocol):
    def summarize(self, issue: Issue) -> str: ...


class HashingEmbedder:
    """Hashed bag of identifier subtokens, term-frequency weighted and L2-normalized."""

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.fingerprint = f"hashed-bow:blake2b-64:d={dim}"

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little") % self.dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for token in tokenize_identifiers(text):
            vec[self._bucket(token)] += 1.0
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            vec[0] = 1.0
            return vec
        return vec / norm


_HEX = re.compile(r"\b0x[0-9a-f]+\b")
_LONG_DIGITS = re.compile(r"\d{5,}")
_SPACE = re.compile(r"\s+")

_METADATA_FIELDS = ("root_cause_category", "product_family", "product_name", "priority", "severity")


def normalize_text(text: str) -> str:
    text = text.lower()
    text = _HEX.sub(" ", text)
    text = _LONG_DIGITS.sub(" ", text)
    return _SPACE.sub(" ", text).strip()


class NormalizingSummarizer:
    """Offline stand-in for an LLM summary: normalized fields in a fixed order."""

    def summarize(self, issue: Issue) -> str:
        parts = [normalize_text(issue.title), normalize_text(issue.description)]
        for name in ("root_cause", "feature_summary"):
            value = getattr(issue, name)
            if value and value.strip():
                parts.append(normalize_text(value))
        for name in _METADATA_FIELDS:
            value = getattr(issue, name)
            if value is not None and str(value).strip():
                parts.append(f"{name.replace('_', ' ')}: {normalize_text(str(value))}")
        return "\n".join(p for p in parts if p)


def build_issue_text(issue: Issue, mode: SicMode, summarizer: Optional[Summarizer] = None) -> str:
    if SicMode(mode) is SicMode.EMBED:
        return issue.title + "\n" + issue.description
    return (summarizer or NormalizingSummarizer()).summarize(issue)


@dataclass
class IndexEntry:
    issue_id: str
    vector: np.ndarray
    filters: tuple[str, str, str]
    mode_tag: SicMode


@dataclass
class IssueIndex:
    mode: SicMode
    dim: int
    embedder_fingerprint: str
    entries: list[IndexEntry] = field(default_factory=list)
    _matrix: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = (
                np.vstack([e.vector for e in self.entries]) if self.entries else np.zeros((0, self.dim))
            )
        return self._matrix

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode.value,
            "dim": self.dim,
            "embedder_fingerprint": self.embedder_fingerprint,
            "entries": [
                {
                    "issue_id": e.issue_id,
                    "filters": list(e.filters),
                    "mode_tag": e.mode_tag.value,
                    "vector": [float(x) for x in e.vector],
                }
                for e in self.entries
            ],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, embedder: Optional[Embedder] = None) -> "IssueIndex":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise IoError(f"cannot read index {path}: {exc}") from exc
        if embedder is not None and embedder.fingerprint != data["embedder_fingerprint"]:
            raise FingerprintMismatch(
                f"{path} was built with {data['embedder_fingerprint']!r}, not {embedder.fingerprint!r}"
            )
        entries = [
            IndexEntry(e["issue_id"], np.asarray(e["vector"], dtype=float), tuple(e["filters"]), SicMode(e["mode_tag"]))
            for e in data["entries"]
        ]
        return cls(SicMode(data["mode"]), data["dim"], data["embedder_fingerprint"], entries)


def index_issues(
    issues: Iterable[Issue],
    mode: SicMode = SicMode.EMBED,
    embedder: Optional[Embedder] = None,
    summarizer: Optional[Summarizer] = None,
) -> IssueIndex:
    mode = SicMode(mode)
    embedder = embedder or HashingEmbedder()
    idx = IssueIndex(mode, embedder.dim, embedder.fingerprint)
    seen: set[str] = set()
    for issue in sorted(issues, key=lambda i: i.id):
        if issue.id in seen:
            raise DuplicateIssueId(issue.id)
        seen.add(issue.id)
        idx.entries.append(IndexEntry(issue.id, _embed(embedder, build_issue_text(issue, mode, summarizer)), issue.filters, mode))
    return idx


def _embed(embedder: Embedder, text: str) -> np.ndarray:
    vec = np.asarray(embedder.embed(text), dtype=float)
    if vec.shape != (embedder.dim,):
        raise DimensionMismatch(f"embedder returned shape {vec.shape}, expected ({embedder.dim},)")
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def retrieve_similar(
    idx: IssueIndex,
    query: Issue,
    k: int = DEFAULT_K,
    embedder: Optional[Embedder] = None,
    summarizer: Optional[Summarizer] = None,
) -> list[tuple[str, float]]:
    """Top-k indexed issues sharing all three categorical filters with ``query``, by cosine."""
    if k < 1:
        raise ValueError("k must be >= 1")
    embedder = embedder or HashingEmbedder(idx.dim)
    if embedder.fingerprint != idx.embedder_fingerprint:
        raise FingerprintMismatch(f"index built with {idx.embedder_fingerprint!r}, query uses {embedder.fingerprint!r}")
    rows = [i for i, e in enumerate(idx.entries) if e.filters == query.filters and e.issue_id != query.id]
    if not rows:
        return []
    q = _embed(embedder, build_issue_text(query, idx.mode, summarizer))
    scores = idx.matrix[rows] @ q
    ranked = sorted(((round(float(s), TIE_DECIMALS), idx.entries[r].issue_id) for s, r in zip(scores, rows)), key=lambda t: (-t[0], t[1]))
    return [(issue_id, score) for score, issue_id in ranked[:k]]


@dataclass
class SicCue:
    similar_issues: list[tuple[str, float]]
    candidate_components: Counter
    candidate_directories: Counter
    candidate_files: Counter
    summaries: list[str]

    @property
    def empty(self) -> bool:
        return not self.candidate_files

    def to_dict(self) -> dict[str, Any]:
        return {
            "similar_issues": [[i, s] for i, s in self.similar_issues],
            "components": dict(sorted(self.candidate_components.items())),
            "directories": dict(sorted(self.candidate_directories.items())),
            "files": dict(sorted(self.candidate_files.items())),
            "summaries": self.summaries,
        }


def extract_cues(
    retrieved: list[tuple[str, float]],
    corpus: Mapping[str, Issue],
    summarizer: Optional[Summarizer] = None,
) -> SicCue:
    """Components, directory prefixes and files changed by the retrieved issues.

    Multiplicities count retrieved issues, so a directory touched by two of
    them has multiplicity 2 however many files each changed there.
    """
    summarizer = summarizer or NormalizingSummarizer()
    components: Counter = Counter()
    directories: Counter = Counter()
    files: Counter = Counter()
    summaries = []
    for issue_id, _ in retrieved:
        issue = corpus.get(issue_id)
        if issue is None:
            raise UnknownIssue(issue_id)
        components.update({p.component for p in issue.changed_files})
        directories.update({d for p in issue.changed_files for d in p.directory_prefixes()})
        files.update({str(p) for p in issue.changed_files})
        summaries.append(summarizer.summarize(issue))
    return SicCue(list(retrieved), components, directories, files, summaries)
