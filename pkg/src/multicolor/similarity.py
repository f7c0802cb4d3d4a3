"""Hierarchical path similarity between the changed-file sets of two issues.

Five levels are scored per file pair (component, top-level directory,
directory prefix, extension, filename). Each root file is matched to its
best-scoring similar file, level scores are averaged over root files, then
over the similar issues of a root issue, then over root issues.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from statistics import fmean
from typing import Any, Iterable, Sequence

from .errors import EmptyCandidateSet
from .model import RepoPath


class Level(str, Enum):
    COMPONENT = "COMPONENT"
    TOP_DIR = "TOP_DIR"
    DIRECTORY = "DIRECTORY"
    EXTENSION = "EXTENSION"
    FILE = "FILE"


LEVELS = tuple(Level)


@dataclass(frozen=True)
class PairLevelScores:
    component_match: int
    top_dir_match: int
    directory_similarity: float
    extension_match: int
    exact_file_match: int

    @property
    def total_score(self) -> float:
        return (
            self.component_match
            + self.top_dir_match
            + self.directory_similarity
            + self.extension_match
            + self.exact_file_match
        )

    def as_tuple(self) -> tuple[float, ...]:
        return (
            self.component_match,
            self.top_dir_match,
            self.directory_similarity,
            self.extension_match,
            self.exact_file_match,
        )


def score_file_pair(f_r: RepoPath, f_s: RepoPath) -> PairLevelScores:
    seg_r, seg_s = f_r.segments, f_s.segments
    if not seg_r:
        # both at the component root: they share a directory only within one component
        top_dir = int(not seg_s and f_r.component == f_s.component)
        directory = float(top_dir)
    else:
        top_dir = int(bool(seg_s) and seg_r[0] == seg_s[0])
        shared = 0
        for a, b in zip(seg_r, seg_s):
            if a != b:
                break
            shared += 1
        directory = shared / len(seg_r)
    return PairLevelScores(
        component_match=int(f_r.component == f_s.component),
        top_dir_match=top_dir,
        directory_similarity=directory,
        extension_match=int(f_r.extension().lower() == f_s.extension().lower()),
        exact_file_match=int(f_r.filename == f_s.filename),
    )


def best_match(f_r: RepoPath, candidates: Sequence[RepoPath]) -> tuple[RepoPath, PairLevelScores]:
    """Highest-total candidate; ties go to the lexicographically smallest path."""
    if not candidates:
        raise EmptyCandidateSet(f"no candidates to match {f_r}")
    best = None
    for f_s in sorted(candidates, key=str):
        scores = score_file_pair(f_r, f_s)
        if best is None or scores.total_score > best[1].total_score:
            best = (f_s, scores)
    return best


@dataclass(frozen=True)
class IssuePairScores:
    levels: dict[Level, float]
    file_match: int

    def rates(self) -> dict[Level, float]:
        """Level averages with FILE replaced by the pair's file_match indicator."""
        out = dict(self.levels)
        out[Level.FILE] = float(self.file_match)
        return out


def score_issue_pair(r_files: Sequence[RepoPath], s_files: Sequence[RepoPath]) -> IssuePairScores:
    if not r_files:
        raise ValueError("root issue has no changed files")
    if not s_files:
        return IssuePairScores({lv: 0.0 for lv in LEVELS}, 0)
    per_file = [best_match(f_r, s_files)[1].as_tuple() for f_r in r_files]
    levels = {lv: fmean(row[i] for row in per_file) for i, lv in enumerate(LEVELS)}
    s_names = {f.filename for f in s_files}
    file_match = int(any(f.filename in s_names for f in r_files))
    return IssuePairScores(levels, file_match)


@dataclass
class SimilarityReport:
    per_level_rates: dict[Level, float]
    per_issue_scores: dict[str, dict[Level, float]]
    issue_pair_count: int
    file_pair_count: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "per_level_rates": {lv.value: self.per_level_rates[lv] for lv in LEVELS},
            "per_issue_scores": {
                i: {lv.value: s[lv] for lv in LEVELS} for i, s in sorted(self.per_issue_scores.items())
            },
            "issue_pair_count": self.issue_pair_count,
            "file_pair_count": self.file_pair_count,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8")


def aggregate_report(
    pairs: Iterable[tuple[str, Sequence[IssuePairScores]]], file_pair_count: int = 0
) -> SimilarityReport:
    """Average each level over a root issue's similar issues, then over root issues.

    ``file_pair_count`` is carried through for reporting; the level rates do
    not depend on it.
    """
    per_issue: dict[str, dict[Level, float]] = {}
    issue_pairs = 0
    for root_id, scored in pairs:
        if not scored:
            raise ValueError(f"root issue {root_id} has no scored pairs")
        issue_pairs += len(scored)
        rows = [s.rates() for s in scored]
        per_issue[root_id] = {lv: fmean(r[lv] for r in rows) for lv in LEVELS}
    if per_issue:
        rates = {lv: fmean(s[lv] for s in per_issue.values()) for lv in LEVELS}
    else:
        rates = {lv: 0.0 for lv in LEVELS}
    return SimilarityReport(rates, per_issue, issue_pairs, file_pair_count)


def similarity_report(
    roots: Iterable[tuple[str, Sequence[RepoPath], Sequence[Sequence[RepoPath]]]]
) -> SimilarityReport:
    """Score every (root, similar) pair and aggregate.

    Each item is ``(root_id, root_files, [similar_files, ...])``. Roots without
    changed files or without similar issues are skipped.
    """
    pairs = []
    file_pairs = 0
    for root_id, r_files, similar in roots:
        if not r_files or not similar:
            continue
        pairs.append((root_id, [score_issue_pair(r_files, s) for s in similar]))
        file_pairs += sum(len(r_files) * len(s) for s in similar)
    return aggregate_report(pairs, file_pairs)
