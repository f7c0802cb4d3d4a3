from dataclasses import replace

import pytest

from conftest import write_tree
from multicolor.codeindex import build_bm25, units_from_graph
from multicolor.config import Config
from multicolor.errors import IndexMismatch
from multicolor.graph import build_graph
from multicolor.localizer import (
    TOOLS,
    LocalizationResult,
    Provenance,
    Variant,
    ablation_variants,
    localize,
    localize_baseline,
)
from multicolor.model import Issue, load_issues, path_has_prefix
from multicolor.sic import HashingEmbedder, index_issues
from planted import make_scenario

FIX = __import__("conftest").FIXTURES


@pytest.fixture(scope="module")
def env():
    g = build_graph(FIX / "mini")
    bm25 = build_bm25(units_from_graph(g, FIX / "mini"), snapshot_id=g.snapshot_id)
    history = load_issues(FIX / "mini_history.jsonl")
    corpus = {i.id: i for i in history}
    return g, bm25, index_issues(history), corpus, Config(repo_root=str(FIX / "mini"))


def queries():
    return {q.id: q for q in load_issues(FIX / "mini_queries.jsonl")}


def check_result(res: LocalizationResult, cfg: Config):
    assert len(res.ranked_files) <= cfg.max_results
    scores = [r.score for r in res.ranked_files]
    assert scores == sorted(scores, reverse=True)
    assert all(r.provenance for r in res.ranked_files)
    assert all(s >= 0 for s in scores)
    assert res.tool_calls == sum(res.tool_counts.values())
    assert set(res.tool_counts) <= set(TOOLS)


def test_planted_duplicate_in_mini(env):
    g, bm25, sic, corpus, cfg = env
    q = queries()["Q-201"]
    res = localize(q, g, bm25, sic, cfg, corpus)
    check_result(res, cfg)
    top = res.ranked_files[0]
    assert top.path == "mini/core/src/circle.cpp"
    assert Provenance.SIC_FILE in top.provenance
    assert res.similar_issues[0][0] == "H-101"
    # H-102 shares the filters and touched core/include as well
    assert res.scope_used == ["mini/core/include", "mini/core/src"]


def test_scope_soundness(env):
    g, bm25, sic, corpus, cfg = env
    for q in queries().values():
        res = localize(q, g, bm25, sic, cfg, corpus)
        if res.similar_issues:
            for r in res.ranked_files:
                if Provenance.BM25 in r.provenance:
                    assert any(path_has_prefix(r.path, p) for p in res.scope_used)


def test_unmatched_filters_fall_back_to_whole_repo(env):
    g, bm25, sic, corpus, cfg = env
    q = queries()["Q-203"]  # filters match no history
    res = localize(q, g, bm25, sic, cfg, corpus)
    assert res.similar_issues == []
    assert res.scope_used == ["mini"]
    assert res.ranked_files[0].path == "mini/app/util.py"
    base = localize_baseline(q, bm25, cfg)
    assert base.ranked_files[0].path == "mini/app/util.py"


def test_baseline_has_no_sic_calls(env):
    g, bm25, sic, corpus, cfg = env
    res = localize_baseline(queries()["Q-202"], bm25, cfg)
    assert res.tool_counts == {"bm25_query": 1}
    generic = Issue("Z", "it is broken", "nothing works at all", "P", "C", "A")
    assert localize_baseline(generic, bm25, cfg).tool_calls == 1


def test_variants(env):
    g, bm25, sic, corpus, cfg = env
    for q in queries().values():
        runs = ablation_variants(q, g, bm25, sic, cfg, corpus)
        assert set(runs) == set(Variant)
        for v, res in runs.items():
            check_result(res, cfg)
            assert ("sic_retrieve" in res.tool_counts) == v.uses_sic
            if not v.uses_graph:
                assert "graph_traverse" not in res.tool_counts and "graph_find" not in res.tool_counts
        again = ablation_variants(q, g, bm25, sic, cfg, corpus)
        assert {v: r.to_dict() for v, r in again.items()} == {v: r.to_dict() for v, r in runs.items()}


def test_result_round_trip(env):
    g, bm25, sic, corpus, cfg = env
    res = localize(queries()["Q-202"], g, bm25, sic, cfg, corpus)
    assert LocalizationResult.from_dict(res.to_dict()).to_dict() == res.to_dict()


def test_index_mismatch(env, tmp_path):
    g, bm25, sic, corpus, cfg = env
    stale = replace(bm25, snapshot_id="0" * 16)
    with pytest.raises(IndexMismatch):
        localize(queries()["Q-201"], g, stale, sic, cfg, corpus)
    with pytest.raises(IndexMismatch):
        localize(queries()["Q-201"], g, bm25, sic, cfg, corpus, embedder=HashingEmbedder(64))


def test_empty_repository(tmp_path):
    root = tmp_path / "empty"
    root.mkdir()
    g = build_graph(root)
    bm25 = build_bm25(units_from_graph(g, root), snapshot_id=g.snapshot_id)
    q = Issue("Q", "crash", "render crash", "P", "C", "A")
    res = localize(q, g, bm25, index_issues([]), Config(repo_root=str(root)), {})
    assert res.ranked_files == [] and res.tool_calls >= 1


def test_unique_token_wins_via_bm25(tmp_path):
    root = write_tree(
        tmp_path / "r",
        {"a/x.py": "def alpha():\n    pass\n", "b/y.py": "def zebrafish_marker():\n    pass\n", "b/z.py": "x = 1\n"},
    )
    g = build_graph(root)
    bm25 = build_bm25(units_from_graph(g, root), snapshot_id=g.snapshot_id)
    q = Issue("Q", "failure", "zebrafish marker missing", "P", "C", "A")
    res = localize(q, g, bm25, index_issues([]), Config(repo_root=str(root)), {})
    assert res.ranked_files[0].path == "r/b/y.py"
    assert localize_baseline(q, bm25, Config()).ranked_files[0].path == "r/b/y.py"


@pytest.mark.parametrize("seed", range(10))
def test_cue_benefit_is_monotone_on_planted_suite(tmp_path, seed):
    sc = make_scenario(seed, tmp_path)
    g = build_graph(sc.root)
    bm25 = build_bm25(units_from_graph(g, sc.root), snapshot_id=g.snapshot_id)
    corpus = {h.id: h for h in sc.history}
    cfg = Config(repo_root=str(sc.root), max_results=50)
    full = localize(sc.query, g, bm25, index_issues(sc.history), cfg, corpus)
    base = localize_baseline(sc.query, bm25, cfg)
    target = sc.target
    cue_files = {str(p) for i, _ in full.similar_issues for p in corpus[i].changed_files}
    assert target in cue_files
    rank_full = full.files.index(target)
    rank_base = base.files.index(target) if target in base.files else len(g.nodes)
    assert rank_full <= rank_base
