import itertools
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polardyn.corpus import default_rules
from polardyn.query import (
    And,
    Group,
    Not,
    Or,
    Phrase,
    QuerySyntaxError,
    Term,
    eval_query,
    eval_with,
    leaves,
    load_queries,
    parse_query,
    pretty_print,
)

from conftest import mk
from oracles import python_eval

WORDS = ["coup", "morsi", "sisi", "#rabaa", "#tamarod", "army", "and", "or", "egypt"]


# -- strategies producing trees the parser can emit ------------------------

leaf_st = st.one_of(
    st.sampled_from(WORDS).map(Term),
    st.lists(st.sampled_from(WORDS), min_size=1, max_size=3).map(lambda ws: Phrase(tuple(ws))),
)


@st.composite
def query_tree(draw, depth=3):
    if depth == 0:
        return draw(leaf_st)
    kind = draw(st.sampled_from(["leaf", "not", "group", "and", "or"]))
    if kind == "leaf":
        return draw(leaf_st)
    if kind == "not":
        return Not(draw(unary_tree(depth - 1)))
    if kind == "group":
        return Group(draw(query_tree(depth - 1)))
    if kind == "and":
        return And(tuple(draw(st.lists(unary_tree(depth - 1), min_size=2, max_size=3))))
    items = st.one_of(unary_tree(depth - 1), and_tree(depth - 1))
    return Or(tuple(draw(st.lists(items, min_size=2, max_size=3))))


@st.composite
def unary_tree(draw, depth):
    if depth == 0:
        return draw(leaf_st)
    kind = draw(st.sampled_from(["leaf", "not", "group"]))
    if kind == "leaf":
        return draw(leaf_st)
    if kind == "not":
        return Not(draw(unary_tree(depth - 1)))
    return Group(draw(query_tree(depth - 1)))


@st.composite
def and_tree(draw, depth):
    return And(tuple(draw(st.lists(unary_tree(max(depth - 1, 0)), min_size=2, max_size=3))))


# -- examples ----------------------------------------------------------------


def test_phrase_and_not():
    q = parse_query('"morsi" AND NOT coup')
    assert q == And((Phrase(("morsi",)), Not(Term("coup"))))


def test_and_binds_tighter_than_or():
    assert parse_query("a OR b AND c") == Or((Term("a"), And((Term("b"), Term("c")))))


def test_incomplete_and_reports_offset():
    with pytest.raises(QuerySyntaxError) as err:
        parse_query("a AND")
    assert err.value.offset == 5
    assert "NOT" in err.value.expected


def test_offsets_count_bytes():
    # 'مرسي' is 4 codepoints but 8 UTF-8 bytes
    with pytest.raises(QuerySyntaxError) as err:
        parse_query("مرسي AND")
    assert err.value.offset == len("مرسي AND".encode("utf-8"))


@pytest.mark.parametrize("src", ["", "   ", "(a", "a b", "AND a", "a OR", '"unterminated', "()", '""'])
def test_syntax_errors(src):
    with pytest.raises(QuerySyntaxError):
        parse_query(src)


def test_lowercase_keywords_are_terms():
    assert parse_query("and") == Term("and")
    assert parse_query("a AND and") == And((Term("a"), Term("and")))
    with pytest.raises(QuerySyntaxError):
        parse_query("a and")  # two adjacent terms, no operator


def test_terms_are_normalized():
    q = parse_query("Coooool", default_rules())
    assert q == Term("cool")


def test_term_and_not_term():
    t = mk("the coup happened")
    assert eval_query(Term("coup"), t)
    assert not eval_query(Not(Term("coup")), t)


def test_phrase_needs_contiguous_tokens():
    t = mk("army took over the state")
    assert eval_query(parse_query('"took over"'), t)
    assert not eval_query(parse_query('"army over"'), t)


def test_load_queries_skips_comments(tmp_path):
    p = tmp_path / "q.txt"
    p.write_text("// a comment\n\ncoup OR army\n#rabaa AND NOT army\n", encoding="utf-8")
    assert load_queries(p) == [Or((Term("coup"), Term("army"))), And((Term("#rabaa"), Not(Term("army"))))]


# -- properties ----------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(query_tree())
def test_pretty_print_round_trip(q):
    assert parse_query(pretty_print(q)) == q


@settings(max_examples=200, deadline=None)
@given(query_tree(), st.lists(st.sampled_from(WORDS), max_size=8))
def test_eval_matches_python_oracle(q, words):
    t = mk(" ".join(words))
    assert eval_query(q, t) == python_eval(pretty_print(q), list(t.tokens))


@settings(max_examples=100, deadline=None)
@given(query_tree())
def test_empty_text_is_all_leaves_false(q):
    assert eval_query(q, mk("")) == eval_with(q, lambda leaf: False)


@settings(max_examples=100, deadline=None)
@given(query_tree())
def test_truth_table_consistency(q):
    # every assignment of the distinct leaves agrees with the string oracle
    distinct = list(dict.fromkeys(leaves(q)))
    names = {pretty_print(leaf): f"L{i}" for i, leaf in enumerate(distinct)}
    pieces = re.findall(r'"[^"]*"|\(|\)|[^\s()"]+', pretty_print(q))
    py = " ".join(p.lower() if p in ("AND", "OR", "NOT") else p if p in "()" else names[p] for p in pieces)
    for bits in itertools.islice(itertools.product([False, True], repeat=len(distinct)), 64):
        table = dict(zip(distinct, bits))
        env = {f"L{i}": b for i, b in enumerate(bits)}
        assert eval_with(q, table.__getitem__) == eval(py, {}, env)
