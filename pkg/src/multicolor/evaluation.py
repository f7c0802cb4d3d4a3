"""Acc@k, similar-issue match rate, richness labels, code-term histograms and report assembly."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from statistics import fmean
from typing import Any, Iterable, Mapping, Optional, Sequence

from .codeindex import count_code_terms
from .errors import EmptyCorpus
from .localizer import LocalizationResult, Variant
from .model import OPTIONAL_ISSUE_FIELDS, Issue, Richness, RichnessLabel
from .similarity import SimilarityReport, score_issue_pair, similarity_report

log = logging.getLogger(__name__)

DEFAULT_RICHNESS_THRESHOLD = 0.5
DEFAULT_VERBOSITY_SCALE = 50
HISTOGRAM_BUCKETS = ("0", "1", "2-5", ">5")


@dataclass(frozen=True)
class EvalRecord:
    issue_id: str
    ground_truth: tuple[str, ...]
    predicted: tuple[str, ...]
    tool_calls: int = 0
    richness: Optional[RichnessLabel] = None


def acc_at_k(records: Sequence[EvalRecord], k: int) -> float:
    """Share of records with a ground-truth file among the top-k predictions (full-path equality)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not records:
        raise EmptyCorpus("no evaluation records")
    hits = sum(1 for r in records if set(r.predicted[:k]) & set(r.ground_truth))
    return hits / len(records)


def sic_match_rate(
    query_issues: Iterable[Issue],
    retrieved_map: Mapping[str, Sequence[str]],
    corpus: Mapping[str, Issue],
) -> float:
    """Share of queries where some retrieved issue changed a file with a ground-truth filename."""
    matched = total = 0
    for q in query_issues:
        if not q.changed_files or q.id not in retrieved_map:
            continue
        total += 1
        for rid in retrieved_map[q.id]:
            if score_issue_pair(q.changed_files, corpus[rid].changed_files).file_match:
                matched += 1
                break
    if total == 0:
        raise EmptyCorpus("no queries with ground truth and retrieval results")
    return matched / total


def completeness_score(issue: Issue, verbosity_scale: int = DEFAULT_VERBOSITY_SCALE) -> float:
    populated = 0
    for name in OPTIONAL_ISSUE_FIELDS:
        value = getattr(issue, name)
        if value is not None and str(value).strip():
            populated += 1
    verbosity = min(1.0, len(issue.description.split()) / verbosity_scale)
    return (populated / len(OPTIONAL_ISSUE_FIELDS) + verbosity) / 2


def classify_richness(
    issue: Issue,
    threshold: float = DEFAULT_RICHNESS_THRESHOLD,
    verbosity_scale: int = DEFAULT_VERBOSITY_SCALE,
) -> RichnessLabel:
    score = completeness_score(issue, verbosity_scale)
    return RichnessLabel(Richness.RICH if score >= threshold else Richness.SPARSE, score)


def code_term_bucket(n: int) -> str:
    if n <= 1:
        return str(n)
    return "2-5" if n <= 5 else ">5"


def code_term_histogram(issues: Iterable[Issue]) -> dict[str, int]:
    hist = dict.fromkeys(HISTOGRAM_BUCKETS, 0)
    for issue in issues:
        hist[code_term_bucket(count_code_terms(issue.title + " " + issue.description))] += 1
    return hist


def build_records(
    results: Iterable[LocalizationResult],
    queries: Mapping[str, Issue],
    threshold: float = DEFAULT_RICHNESS_THRESHOLD,
    verbosity_scale: int = DEFAULT_VERBOSITY_SCALE,
) -> dict[Variant, list[EvalRecord]]:
    """Group results by variant, joining ground truth from ``queries``; unknown ids are skipped."""
    out: dict[Variant, list[EvalRecord]] = {}
    for res in results:
        q = queries.get(res.issue_id)
        if q is None:
            log.warning("no ground truth for %s; skipped", res.issue_id)
            continue
        out.setdefault(res.variant, []).append(
            EvalRecord(
                res.issue_id,
                tuple(str(p) for p in q.changed_files),
                tuple(res.files),
                res.tool_calls,
                classify_richness(q, threshold, verbosity_scale),
            )
        )
    return out


def _acc_or_none(records: Sequence[EvalRecord], k: int) -> Optional[float]:
    return acc_at_k(records, k) if records else None


def evaluation_report(
    results: Sequence[LocalizationResult],
    queries: Mapping[str, Issue],
    corpus: Mapping[str, Issue],
    ks: Sequence[int] = (1, 3, 5),
    threshold: float = DEFAULT_RICHNESS_THRESHOLD,
    verbosity_scale: int = DEFAULT_VERBOSITY_SCALE,
) -> tuple[dict[str, Any], SimilarityReport]:
    """Per-variant Acc@k table, tool-call means, richness split, histogram and similarity report."""
    by_variant = build_records(results, queries, threshold, verbosity_scale)
    if not by_variant:
        raise EmptyCorpus("no localization results matched a query issue")
    variants: dict[str, Any] = {}
    for variant in sorted(by_variant, key=lambda v: list(Variant).index(v)):
        records = by_variant[variant]
        rich = [r for r in records if r.richness and r.richness.label is Richness.RICH]
        sparse = [r for r in records if r.richness and r.richness.label is Richness.SPARSE]
        entry: dict[str, Any] = {
            "issues": len(records),
            "acc_at_k": {str(k): acc_at_k(records, k) for k in ks},
            "mean_tool_calls": fmean(r.tool_calls for r in records),
            "acc_at_5_rich": _acc_or_none(rich, 5),
            "acc_at_5_sparse": _acc_or_none(sparse, 5),
            "rich_count": len(rich),
            "sparse_count": len(sparse),
            "sic_match_rate": None,
        }
        if variant.uses_sic:
            retrieved = {
                r.issue_id: [i for i, _ in r.similar_issues] for r in results if r.variant is variant
            }
            try:
                entry["sic_match_rate"] = sic_match_rate(
                    [queries[i] for i in sorted(retrieved) if i in queries], retrieved, corpus
                )
            except EmptyCorpus:
                pass
        variants[variant.value] = entry

    sim = similarity_report(_similarity_inputs(results, queries, corpus))
    evaluated = sorted({r.issue_id for rs in by_variant.values() for r in rs})
    report = {
        "variants": variants,
        "ks": list(ks),
        "code_term_histogram": code_term_histogram(queries[i] for i in evaluated),
        "metadata": {
            "richness_threshold": threshold,
            "verbosity_scale": verbosity_scale,
            "ground_truth_comparison": "full-path",
            "query_count": len(evaluated),
        },
    }
    return report, sim


def _similarity_inputs(results, queries, corpus):
    # one retrieval per query: prefer the full pipeline, else the SIC + code search arm
    chosen: dict[str, LocalizationResult] = {}
    for variant in (Variant.FULL, Variant.SIC_PLUS_CODE_SEARCH):
        for r in results:
            if r.variant is variant and r.issue_id not in chosen:
                chosen[r.issue_id] = r
    for issue_id in sorted(chosen):
        q = queries.get(issue_id)
        if q is None:
            continue
        similar = [corpus[i].changed_files for i, _ in chosen[issue_id].similar_issues if i in corpus]
        yield issue_id, q.changed_files, similar


def write_report(report: dict[str, Any], path: str | Path) -> None:
    Path(path).write_text(json.dumps(report, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def write_csv(report: dict[str, Any], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["variant", "k", "acc", "mean_tool_calls"])
        for name, entry in report["variants"].items():
            for k, acc in entry["acc_at_k"].items():
                writer.writerow([name, k, f"{acc:.6f}", f"{entry['mean_tool_calls']:.6f}"])


def format_table(report: dict[str, Any]) -> str:
    ks = report["ks"]
    header = ["variant"] + [f"Acc@{k}" for k in ks] + ["calls"]
    rows = [header]
    for name, entry in report["variants"].items():
        rows.append(
            [name] + [f"{entry['acc_at_k'][str(k)]:.4f}" for k in ks] + [f"{entry['mean_tool_calls']:.2f}"]
        )
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)
