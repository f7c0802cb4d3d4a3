import math
import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multicolor.codeindex import (
    Bm25Index,
    IndexableUnit,
    build_bm25,
    code_terms,
    count_code_terms,
    query_bm25,
    query_files,
    tokenize_identifiers,
    units_from_graph,
)
from multicolor.errors import DuplicateUnit
from multicolor.model import EntityKind
from oracles import bm25_scores, ranking

FIXTURES = Path(__file__).parent / "fixtures"

# ten units; every frozen value below was produced by oracles.bm25_scores
DOCS = {
    "u00": "render frame buffer flush render".split(),
    "u01": "parse header token stream".split(),
    "u02": "socket packet stream queue packet packet".split(),
    "u03": "render shader texture".split(),
    "u04": "panel layout widget button button label".split(),
    "u05": "cache token cursor".split(),
    "u06": "timer queue flush".split(),
    "u07": "font glyph render text layout label".split(),
    "u08": "header".split(),
    "u09": "battery sensor driver codec channel mixer volume signal".split(),
}
FROZEN = {
    ("render", "flush"): {
        "u00": 2.944030024592384,
        "u06": 1.715542100017513,
        "u03": 1.3259426681403188,
        "u07": 1.0077164277866424,
    },
    ("packet",): {"u02": 2.9222309082123026},
    ("header", "token"): {"u01": 3.104314276222167, "u08": 2.1730199933555165, "u05": 1.715542100017513},
    ("layout", "label", "button"): {"u04": 5.112393341922879, "u07": 2.6076239920266198},
}


def corpus_index(docs=DOCS, **kw):
    return build_bm25([IndexableUnit(u, f"c/{u}.py", EntityKind.FILE, toks) for u, toks in docs.items()], **kw)


# ---------------------------------------------------------------- tokenizer


@pytest.mark.parametrize(
    "text,tokens",
    [
        ("parse_http_request", ["parse_http_request", "parse", "http", "request"]),
        ("QmlButtonHandler", ["qmlbuttonhandler", "qml", "button", "handler"]),
        ("HTTPServer2", ["httpserver2", "http", "server", "2"]),
        ("plain", ["plain"]),
        ("", []),
        ("a.b-c", ["a", "b", "c"]),
        ("__init__", ["init"]),
    ],
)
def test_tokenize_examples(text, tokens):
    assert tokenize_identifiers(text) == tokens


@given(st.text(max_size=80))
def test_tokenize_idempotent_on_subtokens(text):
    out = tokenize_identifiers(text)
    assert out == tokenize_identifiers(text)
    for tok in out:
        assert tok == tok.lower()
        if tok.isascii() and (tok.isalpha() or tok.isdigit()):
            assert tokenize_identifiers(tok) == [tok]


# ---------------------------------------------------------------- code terms


def test_code_term_examples():
    assert count_code_terms("Submit button text misaligned vertically in dark mode.") == 0
    assert count_code_terms("NullPointer in parse_header during RenderLoop") == 3
    assert count_code_terms("") == 0
    assert code_terms("see (parseConfig), then") == ["parseConfig"]


def test_code_terms_labelled_fixture():
    rows = [line.rstrip("\n").split("\t", 1) for line in (FIXTURES / "code_terms.tsv").open(encoding="utf-8")]
    assert len(rows) == 30
    mismatches = [(s, int(n), count_code_terms(s)) for n, s in rows if count_code_terms(s) != int(n)]
    assert mismatches == []


# ---------------------------------------------------------------- bm25


def test_singleton_corpus():
    idx = build_bm25([IndexableUnit("u", "c/a.py", EntityKind.FILE, ["alpha"])])
    assert idx.N == 1
    assert idx.postings == {"alpha": [("u", 1)]}


def test_disjoint_vocabularies():
    idx = corpus_index({"a": ["x", "y"], "b": ["z"]})
    assert all(len(p) == 1 for p in idx.postings.values())


def test_duplicate_unit():
    u = IndexableUnit("u", "c/a.py", EntityKind.FILE, ["a"])
    with pytest.raises(DuplicateUnit):
        build_bm25([u, u])


@pytest.mark.parametrize("query", sorted(FROZEN))
def test_bm25_matches_oracle_and_frozen_values(query):
    idx = corpus_index()
    got = dict(query_bm25(idx, list(query), top_n=10))
    oracle = bm25_scores(DOCS, list(query))
    assert got.keys() == oracle.keys() == FROZEN[query].keys()
    for u in got:
        assert got[u] == pytest.approx(oracle[u], abs=1e-9)
        assert got[u] == pytest.approx(FROZEN[query][u], abs=1e-9)
    assert [u for u, _ in query_bm25(idx, list(query), 10)] == ranking(oracle)


def test_idf_matches_formula():
    idx = corpus_index()
    assert idx.idf("render") == pytest.approx(math.log(1 + (10 - 3 + 0.5) / 3.5), abs=1e-12)


def test_empty_query_and_scope():
    idx = corpus_index()
    assert query_bm25(idx, [], 5) == []
    assert query_bm25(idx, ["packet"], 5, scope=["c/u00.py"]) == []
    assert [u for u, _ in query_bm25(idx, ["render"], 5, scope=["c/u03.py", "c/u07.py"])] == ["u03", "u07"]
    with pytest.raises(ValueError):
        query_bm25(idx, ["render"], 0)


vocab = [f"w{i}" for i in range(30)]


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_planted_unique_token_ranks_first(seed):
    rng = random.Random(seed)
    docs = {f"d{i:02d}": [rng.choice(vocab) for _ in range(rng.randint(1, 20))] for i in range(rng.randint(2, 25))}
    target = rng.choice(sorted(docs))
    docs[target] = docs[target] + ["zzplanted"]
    idx = corpus_index(docs)
    ranked = query_bm25(idx, ["zzplanted"], 5)
    assert [u for u, _ in ranked] == [target]


@settings(max_examples=50, deadline=None)
@given(st.permutations(sorted(DOCS)), st.lists(st.sampled_from(sorted({t for d in DOCS.values() for t in d})), max_size=4))
def test_ranking_independent_of_insertion_order(order, query):
    a = corpus_index()
    b = corpus_index({u: DOCS[u] for u in order})
    assert query_bm25(a, query, 10) == query_bm25(b, query, 10)


@settings(max_examples=50, deadline=None)
@given(st.sets(st.sampled_from(sorted(DOCS))), st.lists(st.sampled_from(["render", "flush", "label", "queue"]), min_size=1, max_size=3))
def test_scope_is_a_pure_filter(scope_units, query):
    idx = corpus_index()
    full = dict(query_bm25(idx, query, 10))
    scoped = query_bm25(idx, query, 10, scope=[f"c/{u}.py" for u in scope_units])
    assert all(full[u] == s for u, s in scoped)
    assert [u for u, _ in scoped] == [u for u, _ in query_bm25(idx, query, 10) if u in scope_units]


def test_serialization_round_trip(tmp_path):
    idx = corpus_index(snapshot_id="abc")
    idx.save(tmp_path / "b.json")
    loaded = Bm25Index.load(tmp_path / "b.json")
    assert query_bm25(loaded, ["render"], 5) == query_bm25(idx, ["render"], 5)
    assert loaded.snapshot_id == "abc"


def test_units_from_graph_and_file_ranking(mini_graph, mini_root):
    units = units_from_graph(mini_graph, mini_root)
    kinds = {u.kind for u in units}
    assert kinds == {EntityKind.FILE, EntityKind.CLASS, EntityKind.FUNCTION, EntityKind.QML_COMPONENT}
    assert len([u for u in units if u.kind is EntityKind.FILE]) == 10
    idx = build_bm25(units, snapshot_id=mini_graph.snapshot_id)
    files = query_files(idx, tokenize_identifiers("clamp value low high"), 3)
    assert files[0][0] == "mini/app/util.py"
    assert len({f for f, _ in files}) == len(files)
