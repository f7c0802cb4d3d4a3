import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multicolor.errors import EmptyCorpus
from multicolor.evaluation import (
    HISTOGRAM_BUCKETS,
    EvalRecord,
    acc_at_k,
    classify_richness,
    code_term_histogram,
    completeness_score,
    evaluation_report,
    format_table,
    sic_match_rate,
    write_csv,
)
from multicolor.localizer import LocalizationResult, Provenance, RankedFile, Variant
from multicolor.model import Issue, Richness, parse_repo_path
from multicolor.similarity import LEVELS, Level, similarity_report
import oracles

FILES = [f"c/d{i}/f{i}.py" for i in range(8)]


def issue(i, files=(), desc="d", title="t", **kw):
    return Issue(i, title, desc, "P", "C", "A", changed_files=tuple(parse_repo_path(f) for f in files), **kw)


def rec(truth, pred, i="x"):
    return EvalRecord(i, tuple(truth), tuple(pred))


def random_records(rng, n):
    return [
        rec(rng.sample(FILES, rng.randint(1, 3)), rng.sample(FILES, rng.randint(0, 6)), f"r{i}") for i in range(n)
    ]


def test_perfect_and_null_predictors():
    perfect = [rec(["a/b.py"], ["a/b.py", "c/d.py"]), rec(["x/y.py"], ["x/y.py"])]
    assert all(acc_at_k(perfect, k) == 1.0 for k in range(1, 6))
    null = [rec(["a/b.py"], ["c/d.py"]), rec(["x/y.py"], [])]
    assert acc_at_k(null, 5) == 0.0


def test_mixed_ten_record_fixture():
    records = [
        rec(["a/x.py"], ["a/x.py"]),  # hit at 1
        rec(["a/x.py"], ["b/x.py", "a/x.py"]),  # hit at 2; filename alone is no hit
        rec(["a/x.py", "a/y.py"], ["c/z.py", "c/w.py", "a/y.py"]),  # hit at 3
        rec(["a/x.py"], []),
        rec(["a/x.py"], ["b/b.py"] * 4 + ["a/x.py"]),  # hit at 5
        rec(["q/q.py"], ["q/q.py"]),  # hit at 1
        rec(["q/q.py"], ["q/r.py"]),
        rec(["q/q.py"], ["r/q.py"]),
        rec(["m/n.py"], ["x/x.py", "y/y.py", "z/z.py", "w/w.py", "v/v.py", "m/n.py"]),  # hit at 6
        rec(["m/n.py"], ["m/n.py", "m/n.py"]),  # hit at 1
    ]
    hand = {1: 3 / 10, 2: 4 / 10, 3: 5 / 10, 4: 5 / 10, 5: 6 / 10, 6: 7 / 10}
    for k, v in hand.items():
        assert acc_at_k(records, k) == pytest.approx(v)
        assert acc_at_k(records, k) == oracles.acc_at_k([(list(r.ground_truth), list(r.predicted)) for r in records], k)


def test_acc_errors():
    with pytest.raises(EmptyCorpus):
        acc_at_k([], 5)
    with pytest.raises(ValueError):
        acc_at_k([rec(["a/b.py"], [])], 0)


@settings(max_examples=200)
@given(st.integers(0, 10**6))
def test_acc_monotone_and_saturating(seed):
    records = random_records(random.Random(seed), random.Random(seed).randint(1, 20))
    values = [acc_at_k(records, k) for k in range(1, 10)]
    assert values == sorted(values)
    longest = max(len(r.predicted) for r in records) or 1
    assert acc_at_k(records, longest) == acc_at_k(records, longest + 3)


def test_sic_match_rate_examples():
    corpus = {"h1": issue("h1", ["c/a/x.py"]), "h2": issue("h2", ["c/b/y.py"]), "h3": issue("h3", ["d/q/x.py"])}
    q1 = issue("q1", ["c/a/x.py"])
    assert sic_match_rate([q1], {"q1": ["h1"]}, corpus) == 1.0
    assert sic_match_rate([q1], {"q1": ["h2"]}, corpus) == 0.0
    # filename equality is enough here
    assert sic_match_rate([q1], {"q1": ["h2", "h3"]}, corpus) == 1.0
    with pytest.raises(EmptyCorpus):
        sic_match_rate([], {}, corpus)


def test_sic_match_rate_matches_recount_and_file_level():
    rng = random.Random(11)
    names = ["a.py", "b.py", "c.qml", "d.cpp", "e.cpp"]

    def path():
        return f"{rng.choice(['ui', 'core'])}/{rng.choice(['x', 'y'])}/{rng.choice(names)}"

    corpus = {f"h{i}": issue(f"h{i}", [path() for _ in range(rng.randint(1, 3))]) for i in range(30)}
    queries = [issue(f"q{i}", [path() for _ in range(rng.randint(1, 2))]) for i in range(20)]
    retrieved = {q.id: rng.sample(sorted(corpus), rng.randint(1, 3)) for q in queries}
    recount = 0
    for q in queries:
        gt = {p.filename for p in q.changed_files}
        if any(p.filename in gt for h in retrieved[q.id] for p in corpus[h].changed_files):
            recount += 1
    assert sic_match_rate(queries, retrieved, corpus) == recount / 20
    # with one retrieved issue per query the FILE level rate coincides
    single = {q.id: retrieved[q.id][:1] for q in queries}
    rep = similarity_report((q.id, q.changed_files, [corpus[single[q.id][0]].changed_files]) for q in queries)
    assert rep.per_level_rates[Level.FILE] == pytest.approx(sic_match_rate(queries, single, corpus))


def test_richness():
    rich = issue(
        "r",
        desc=" ".join(["word"] * 60),
        root_cause="rc",
        feature_summary="fs",
        priority=1,
        severity=2,
        root_cause_category="cat",
        product_family="fam",
        product_name="prod",
    )
    assert classify_richness(rich).label is Richness.RICH
    assert classify_richness(rich).completeness_score == 1.0
    sparse = issue("s", desc="three short tokens")
    assert classify_richness(sparse).label is Richness.SPARSE
    # 3 of 7 fields and 25 of 50 tokens; the label flips exactly at the score
    edge = issue("e", desc=" ".join(["w"] * 25), root_cause="x", priority=1, severity=1)
    score = completeness_score(edge)
    assert score == pytest.approx((3 / 7 + 0.5) / 2)
    assert classify_richness(edge, threshold=score).label is Richness.RICH
    assert classify_richness(edge, threshold=score + 1e-12).label is Richness.SPARSE


def test_histogram():
    zero = [issue(f"z{i}", desc="plain words only") for i in range(4)]
    assert code_term_histogram(zero) == {"0": 4, "1": 0, "2-5": 0, ">5": 0}
    planted = [
        issue("a", desc="nothing here"),  # 0
        issue("b", desc="see parse_header"),  # 1
        issue("c", desc="fooBar and baz_qux"),  # 2
        issue("d", desc="a_b c_d e_f g_h i_j"),  # 5
        issue("e", desc="a_b c_d e_f g_h i_j k_l"),  # 6
        issue("f", title="RenderLoop", desc="stalls"),  # 1 via the title
    ]
    assert code_term_histogram(planted) == {"0": 1, "1": 2, "2-5": 2, ">5": 1}


@settings(max_examples=100)
@given(st.lists(st.text(min_size=1, max_size=40).filter(lambda s: s.strip()), max_size=25))
def test_histogram_partitions(texts):
    issues = [issue(f"i{n}", desc=t) for n, t in enumerate(texts)]
    hist = code_term_histogram(issues)
    assert tuple(hist) == HISTOGRAM_BUCKETS
    assert sum(hist.values()) == len(issues)


def _result(i, variant, files, sims=(), calls=1):
    return LocalizationResult(
        i, variant, [RankedFile(f, 1.0 / (n + 1), [Provenance.BM25]) for n, f in enumerate(files)], calls, ["c"], list(sims)
    )


def test_evaluation_report(tmp_path):
    queries = {"q1": issue("q1", ["c/a/x.py"]), "q2": issue("q2", ["c/b/y.py"])}
    corpus = {"h1": issue("h1", ["c/a/x.py"]), "h2": issue("h2", ["c/z/w.py"])}
    results = [
        _result("q1", Variant.FULL, ["c/a/x.py"], [("h1", 1.0)], 4),
        _result("q2", Variant.FULL, ["c/q/q.py", "c/b/y.py"], [("h2", 0.5)], 6),
        _result("q1", Variant.CODE_SEARCH, ["c/q/q.py"]),
        _result("q2", Variant.CODE_SEARCH, ["c/b/y.py"]),
        _result("zz", Variant.CODE_SEARCH, ["c/b/y.py"]),
    ]
    report, sim = evaluation_report(results, queries, corpus, ks=(1, 2))
    full = report["variants"]["full"]
    assert full["acc_at_k"] == {"1": 0.5, "2": 1.0}
    assert full["mean_tool_calls"] == 5.0
    assert full["sic_match_rate"] == 0.5
    assert report["variants"]["code-search"]["sic_match_rate"] is None
    assert report["variants"]["code-search"]["issues"] == 2
    assert sum(report["code_term_histogram"].values()) == 2
    assert report["metadata"]["richness_threshold"] == 0.5
    assert sim.issue_pair_count == 2
    assert set(sim.per_level_rates) == set(LEVELS)
    write_csv(report, tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "variant,k,acc,mean_tool_calls"
    assert "Acc@2" in format_table(report)
    with pytest.raises(EmptyCorpus):
        evaluation_report([_result("zz", Variant.FULL, [])], queries, corpus)
