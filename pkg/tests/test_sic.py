import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multicolor.errors import DimensionMismatch, DuplicateIssueId, FingerprintMismatch, UnknownIssue
from multicolor.model import Issue, parse_repo_path
from multicolor.sic import (
    DEFAULT_K,
    HashingEmbedder,
    IssueIndex,
    NormalizingSummarizer,
    SicMode,
    build_issue_text,
    extract_cues,
    index_issues,
    retrieve_similar,
)
from oracles import filtered_topk

WORDS = "crash hang render texture panel button socket timer flicker audio driver cursor leak stall".split()


def issue(i, title="t", desc="d", filters=("P", "C", "A"), files=(), **kw):
    return Issue(
        id=i,
        title=title,
        description=desc,
        program_name=filters[0],
        triage_category=filters[1],
        triage_assignment=filters[2],
        changed_files=tuple(parse_repo_path(f) for f in files),
        **kw,
    )


def random_corpus(rng, n, n_filters=2):
    out = []
    for i in range(n):
        filters = tuple(rng.choice([f"{c}{j}" for j in range(n_filters)]) for c in "PCA")
        words = rng.choices(WORDS, k=rng.randint(1, 8))
        out.append(issue(f"I{i:04d}", " ".join(words[:2]), " ".join(words), filters))
    return out


def test_default_k_is_five():
    assert DEFAULT_K == 5


def test_embedder_is_deterministic_and_unit_norm():
    e = HashingEmbedder()
    a, b = e.embed("Render loop stalls"), e.embed("Render loop stalls")
    assert np.array_equal(a, b)
    assert np.linalg.norm(a) == pytest.approx(1.0)
    assert a.shape == (256,)
    assert np.linalg.norm(e.embed("")) == pytest.approx(1.0)


def test_issue_text_modes():
    plain = issue("a", "Title", "Body")
    assert build_issue_text(plain, SicMode.EMBED) == "Title\nBody"
    assert build_issue_text(plain, SicMode.SUMM) == "title\nbody"
    rich = issue("b", "Title", "Crash at 0xdeadbeef after 1234567 frames", root_cause="Stale  POINTER in cache")
    text = build_issue_text(rich, SicMode.SUMM)
    assert "stale pointer in cache" in text
    assert "0xdeadbeef" not in text and "1234567" not in text


def test_summarizer_orders_fields():
    rich = issue("c", "T", "D", root_cause="R", feature_summary="F", product_name="Prod", priority=2)
    assert NormalizingSummarizer().summarize(rich) == "t\nd\nr\nf\nproduct name: prod\npriority: 2"


def test_index_basics():
    assert len(index_issues([])) == 0
    idx = index_issues([issue("a", desc="x"), issue("b", desc="y"), issue("c", desc="z")])
    assert len(idx) == 3
    assert np.allclose(np.linalg.norm(idx.matrix, axis=1), 1.0)
    with pytest.raises(DuplicateIssueId):
        index_issues([issue("a"), issue("a")])


def test_reindex_is_byte_identical(tmp_path):
    corpus = random_corpus(random.Random(1), 30)
    index_issues(corpus).save(tmp_path / "a.json")
    index_issues(list(reversed(corpus))).save(tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    loaded = IssueIndex.load(tmp_path / "a.json", HashingEmbedder())
    q = corpus[0]
    assert retrieve_similar(loaded, q) == retrieve_similar(index_issues(corpus), q)
    with pytest.raises(FingerprintMismatch):
        IssueIndex.load(tmp_path / "a.json", HashingEmbedder(128))


def test_dimension_mismatch():
    class Bad:
        dim = 8
        fingerprint = "bad"

        def embed(self, text):
            return np.ones(4)

    with pytest.raises(DimensionMismatch):
        index_issues([issue("a")], embedder=Bad())


def test_filters_exhaust_candidates():
    idx = index_issues([issue("a", filters=("X", "C", "A"))])
    assert retrieve_similar(idx, issue("q")) == []


def test_verbatim_duplicate_first():
    idx = index_issues([issue("a", "render hang", "texture upload"), issue("b", "audio", "driver leak")])
    hits = retrieve_similar(idx, issue("q", "render hang", "texture upload"))
    assert hits[0][0] == "a"
    assert hits[0][1] == pytest.approx(1.0, abs=1e-6)


def test_query_excludes_itself():
    idx = index_issues([issue("a", "x"), issue("b", "x")])
    assert [i for i, _ in retrieve_similar(idx, issue("a", "x"))] == ["b"]


def test_fewer_survivors_than_k():
    idx = index_issues([issue("a"), issue("b")])
    assert len(retrieve_similar(idx, issue("q"), k=5)) == 2


def test_embed_and_summ_indexes_have_equal_counts():
    corpus = random_corpus(random.Random(3), 40)
    assert len(index_issues(corpus, SicMode.EMBED)) == len(index_issues(corpus, SicMode.SUMM))


def test_brute_force_agreement_on_1000_issues():
    rng = random.Random(7)
    corpus = random_corpus(rng, 1000)
    emb = HashingEmbedder()
    idx = index_issues(corpus, embedder=emb)
    rows = [(i.id, i.filters, list(emb.embed(i.title + "\n" + i.description))) for i in corpus]
    for q in random_corpus(random.Random(8), 50):
        got = retrieve_similar(idx, q, 5, emb)
        exp = filtered_topk(list(emb.embed(q.title + "\n" + q.description)), q.filters, q.id, rows, 5)
        assert [g[0] for g in got] == [e[0] for e in exp]
        assert all(abs(g[1] - e[1]) < 1e-9 for g, e in zip(got, exp))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 8))
def test_prefix_monotone_in_k(seed, k):
    rng = random.Random(seed)
    corpus = random_corpus(rng, 60, n_filters=1)
    idx = index_issues(corpus)
    q = corpus[rng.randrange(len(corpus))]
    small, big = retrieve_similar(idx, q, k), retrieve_similar(idx, q, k + 1)
    assert big[: len(small)] == small
    assert all(a[1] >= b[1] for a, b in zip(small, small[1:]))


@given(st.text(max_size=60), st.text(max_size=60))
def test_cosine_symmetry_and_self(a, b):
    e = HashingEmbedder()
    va, vb = e.embed(a), e.embed(b)
    assert float(va @ va) == pytest.approx(1.0, abs=1e-6)
    assert float(va @ vb) == float(vb @ va)


def test_extract_cues():
    corpus = {
        "a": issue("a", files=["ui/src/a.qml"]),
        "b": issue("b", files=["ui/src/b.qml", "ui/src/c.qml"]),
        "e": issue("e"),
    }
    one = extract_cues([("a", 0.9)], corpus)
    assert dict(one.candidate_components) == {"ui": 1}
    assert dict(one.candidate_directories) == {"ui": 1, "ui/src": 1}
    assert dict(one.candidate_files) == {"ui/src/a.qml": 1}
    two = extract_cues([("a", 0.9), ("b", 0.8)], corpus)
    assert two.candidate_directories["ui/src"] == 2
    assert extract_cues([("e", 1.0)], corpus).empty
    with pytest.raises(UnknownIssue):
        extract_cues([("zz", 1.0)], corpus)
