import json
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polardyn.corpus import (
    Corpus,
    DataError,
    ElongationRule,
    FoldRule,
    NormalizationRules,
    RemoveRule,
    ReplaceRule,
    default_rules,
    extract_hashtags,
    filter_corpus,
    normalize_text,
    parse_timestamp,
    read_corpus,
    select_active_users,
    tokenize,
    write_corpus,
)
from polardyn.query import parse_query

from conftest import mk

# -- normalization -------------------------------------------------------------


def test_elongation_compresses_runs():
    assert normalize_text("cooooool", NormalizationRules([ElongationRule(2)])) == "cool"
    assert normalize_text("cooooool", NormalizationRules([ElongationRule(1)])) == "col"


def test_mark_removal_deletes_codepoint():
    rules = NormalizationRules([RemoveRule(frozenset({"ـ"}), frozenset({"Mn"}))])
    assert normalize_text("مـرسي", rules) == "مرسي"
    assert normalize_text("مُرسِي", rules) == "مرسي"  # damma and kasra are Mn


def test_default_rules_fold_letters():
    rules = default_rules()
    assert normalize_text("أحمد", rules) == "احمد"
    # two hearts become spaces; the run of three spaces is then capped at two
    assert normalize_text("♥♥ hi", rules) == "  hi"


def test_normalized_text_is_fixed():
    rules = default_rules()
    s = "already plain text"
    assert normalize_text(s, rules) == s
    assert normalize_text("", rules) == ""


def test_cyclic_substitutions_rejected():
    with pytest.raises(ValueError, match="cycle"):
        NormalizationRules([FoldRule({"a": "b"}), FoldRule({"b": "a"})])
    with pytest.raises(ValueError):
        NormalizationRules([ElongationRule(0)])
    with pytest.raises(ValueError):
        NormalizationRules([FoldRule({"ab": "c"})])


def test_rules_json_round_trip(tmp_path):
    rules = default_rules()
    p = tmp_path / "rules.json"
    p.write_text(json.dumps(rules.to_json()), encoding="utf-8")
    assert NormalizationRules.load(p) == rules


# rule sets whose substitution graph is acyclic: map a lower alphabet onto a higher one
_src = "abcdefg"
_dst = "hijklmn"
rule_st = st.one_of(
    st.dictionaries(st.sampled_from(_src), st.sampled_from(_dst + " "), max_size=4).map(FoldRule),
    st.builds(lambda cs: RemoveRule(frozenset(cs), frozenset({"Mn"})), st.sets(st.sampled_from(_src + _dst), max_size=3)),
    st.dictionaries(st.sampled_from(_src), st.text(_dst + " ", max_size=3), max_size=3).map(ReplaceRule),
    st.integers(1, 3).map(ElongationRule),
)


@settings(max_examples=300, deadline=None)
@given(st.lists(rule_st, max_size=5), st.text(max_size=40))
def test_normalization_idempotent(rules, text):
    r = NormalizationRules(rules)
    once = r.apply(text)
    assert r.apply(once) == once


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=60))
def test_default_normalization_idempotent(text):
    r = default_rules()
    assert r.apply(r.apply(text)) == r.apply(text)


# -- tokens and tweets -----------------------------------------------------------


def test_tokenize_strips_edge_punctuation():
    assert tokenize("Hello, world! #Rabaa... @Sisi: (army)") == ["hello", "world", "#rabaa", "@sisi", "army"]
    assert tokenize("  ") == []


def test_hashtags_in_order():
    assert extract_hashtags("#b a #A, #b") == ("#b", "#a", "#b")
    t = mk("x #one y #two")
    assert t.hashtags == ("#one", "#two")
    assert extract_hashtags(" ".join(t.hashtags)) == t.hashtags


def test_self_repost_rejected():
    with pytest.raises(DataError):
        mk("rt", author="u1", repost_of="u1")


def test_timestamps_become_utc():
    ts = parse_timestamp("2013-07-03T20:00:00+02:00")
    assert ts.isoformat() == "2013-07-03T18:00:00+00:00"
    assert parse_timestamp("2013-07-03T18:00:00Z") == ts
    with pytest.raises(DataError):
        parse_timestamp("yesterday")


# -- corpus ------------------------------------------------------------------------


def test_corpus_sorted_and_indexed():
    a = mk("a", author="u2", sec=5, tid="b")
    b = mk("b", author="u1", sec=5, tid="a")
    c = mk("c", author="u1", day=1, tid="c")
    corpus = Corpus([c, a, b])
    assert [t.id for t in corpus] == ["a", "b", "c"]
    assert [t.id for t in corpus.by_author("u1")] == ["a", "c"]
    assert len(corpus.days) == 2
    for d, pos in corpus.day_positions().items():
        assert all(corpus[i].day == d for i in pos)


def test_duplicate_ids_last_wins():
    corpus = Corpus([mk("first", tid="t1"), mk("second", tid="t1")])
    assert len(corpus) == 1 and corpus[0].text == "second"
    assert corpus.n_duplicates == 1


@pytest.mark.parametrize("suffix", [".jsonl", ".csv"])
def test_read_write_round_trip(tmp_path, suffix):
    tweets = [mk("hello #x, world", author="u1", tid="1"), mk("rt", author="u2", tid="2", sec=9, repost_of="u1")]
    p = tmp_path / f"c{suffix}"
    write_corpus(Corpus(tweets), p)
    back = read_corpus(p)
    assert list(back) == list(Corpus(tweets))


def test_read_corpus_drops_self_reposts(tmp_path):
    p = tmp_path / "raw.jsonl"
    rows = [
        {"id": "1", "author_id": "u1", "timestamp": "2013-07-01T00:00:00Z", "text": "ok"},
        {"id": "2", "author_id": "u1", "timestamp": "2013-07-01T00:00:01Z", "text": "rt", "repost_of": "u1"},
    ]
    p.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    c = read_corpus(p, default_rules())
    assert len(c) == 1 and c.n_rejected == 1


def test_read_corpus_bad_json(tmp_path):
    p = tmp_path / "bad.jsonl"
    p.write_text("{not json\n", encoding="utf-8")
    with pytest.raises(DataError):
        read_corpus(p)


# -- filtering ----------------------------------------------------------------------

VOCAB = ["coup", "morsi", "army", "#rabaa", "sisi", "cairo", "egypt", "and"]


def random_corpus(rng: random.Random, n: int = 200) -> Corpus:
    return Corpus(
        mk(" ".join(rng.choice(VOCAB) for _ in range(rng.randint(0, 6))), author=f"u{rng.randrange(20)}",
           sec=k, tid=f"r{k:04d}")
        for k in range(n)
    )


def test_filter_examples():
    corpus = Corpus([mk("coup now", tid="1"), mk("nothing", tid="2"), mk("quiet", tid="3")])
    assert [t.id for t in filter_corpus(corpus, [parse_query("coup")])] == ["1"]
    every = Corpus([mk("x a", tid="1"), mk("x b", tid="2")])
    assert list(filter_corpus(every, [parse_query("x")])) == list(every)
    with pytest.raises(ValueError):
        filter_corpus(corpus, [])


def _has_run(toks, run):
    return any(toks[i : i + len(run)] == run for i in range(len(toks) - len(run) + 1))


# each query next to a hand-written predicate over the token list
ORACLE_QUERIES = [
    ("coup AND NOT army", lambda w: "coup" in w and "army" not in w),
    ('"morsi sisi"', lambda w: _has_run(w, ["morsi", "sisi"])),
    ("#rabaa OR (cairo AND egypt)", lambda w: "#rabaa" in w or ("cairo" in w and "egypt" in w)),
    ("NOT coup AND NOT morsi", lambda w: "coup" not in w and "morsi" not in w),
    ("and", lambda w: "and" in w),
]


def test_filter_matches_brute_force():
    rng = random.Random(11)
    queries = [parse_query(src) for src, _ in ORACLE_QUERIES]
    for _ in range(5):
        corpus = random_corpus(rng)
        kept = [t.id for t in filter_corpus(corpus, queries)]
        expected = [t.id for t in corpus if any(pred(list(t.tokens)) for _, pred in ORACLE_QUERIES)]
        assert kept == expected


def test_filter_subset_and_monotone():
    rng = random.Random(5)
    corpus = random_corpus(rng)
    ids = {t.id for t in corpus}
    qs = [parse_query("coup"), parse_query("army AND sisi"), parse_query('"egypt cairo"')]
    prev = set()
    for k in range(1, len(qs) + 1):
        out = filter_corpus(corpus, qs[:k])
        got = [t.id for t in out]
        assert got == sorted(got)  # order preserved (ids follow time)
        assert set(got) <= ids
        assert prev <= set(got)
        prev = set(got)


# -- active users ----------------------------------------------------------------------


def test_active_user_boundary():
    tweets = [mk("x", author="eleven", sec=k) for k in range(11)]
    tweets += [mk("x", author="ten", sec=k) for k in range(10)]
    c = Corpus(tweets)
    assert select_active_users(c, 10) == {"eleven"}


def test_active_users_counting_oracle():
    rng = random.Random(2)
    counts = {f"u{k}": rng.randint(0, 25) for k in range(40)}
    tweets = [mk("x", author=u, sec=j, repost_of="other" if j % 3 == 0 else None)
              for u, n in counts.items() for j in range(n)]
    c = Corpus(tweets)
    for m in (1, 5, 10, 20):
        assert select_active_users(c, m) == {u for u, n in counts.items() if n > m}


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from("abcdef"), max_size=80), st.integers(1, 10), st.integers(0, 10))
def test_active_users_monotone(authors, m1, extra):
    c = Corpus(mk("x", author=a, sec=k) for k, a in enumerate(authors))
    assert select_active_users(c, m1) >= select_active_users(c, m1 + extra)
    assert Counter(t.author_id for t in c) == Counter(authors)
