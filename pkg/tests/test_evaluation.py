import json
import warnings
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpgrules.errors import DataError
from cpgrules.evaluation import (canonicalize, jaccard, jaccard_details, load_rule_file, load_synonyms,
                                 normalize_term, report)
from cpgrules.rules import parse_rule
from cpgrules.textprep import _data_path

PANEL = _data_path("expert_panel")
PARTICIPANTS = ("we", "exp1", "exp2", "exp3")


def panel_matrix():
    rows = []
    for line in (PANEL / "matrix.tsv").read_text(encoding="utf-8").splitlines():
        if line.startswith("#") or not line.strip():
            continue
        no, rule, *marks = line.split("\t")
        rows.append((int(no), rule, [m == "1" for m in marks]))
    return rows


def test_canonical_set_semantics():
    a = parse_rule("IF diabetes = Yes AND Age Group = adult THEN SBP Goal < 130 mm Hg")
    b = parse_rule("IF age group = 'Adults' AND Diabetes = yes AND diabetes = Yes THEN sbp goal < 130 mmHg")
    syn = load_synonyms()
    assert canonicalize(a, syn) == canonicalize(b, syn)
    assert canonicalize(a) != canonicalize(parse_rule("IF diabetes = No THEN SBP Goal < 130 mm Hg"))


def test_synonyms_and_alternatives():
    syn = {"ccb": "calcium channel blocker"}
    assert normalize_term("CCB", syn) == "calcium channel blocker"
    a = canonicalize(parse_rule("IF Race = black THEN Therapy = CCB OR thiazide"), syn)
    b = canonicalize(parse_rule("IF Race = black THEN Therapy = thiazide, or calcium channel blocker"), syn)
    assert a == b


def test_synonym_chain_reaches_fixpoint_and_survives_cycles():
    assert normalize_term("a", {"a": "b", "b": "c"}) == "c"
    assert normalize_term("a", {"a": "b", "b": "a"}) in {"a", "b"}


rule_text = st.sampled_from([r for _, r, _ in panel_matrix()])


@settings(max_examples=60, deadline=None)
@given(rule_text)
def test_canonicalize_idempotent(text):
    syn = load_synonyms()
    once = canonicalize(parse_rule(text), syn)
    assert canonicalize(once, syn) == once


def conds(n):
    return " AND ".join(f"k{i} = v{i}" for i in range(n))


@given(st.permutations(list(range(5))))
def test_condition_order_irrelevant(order):
    text = "IF " + " AND ".join(f"k{i} = v{i}" for i in order) + " THEN act"
    assert canonicalize(parse_rule(text)) == canonicalize(parse_rule(f"IF {conds(5)} THEN act"))


sets = st.frozensets(st.integers(0, 30), max_size=15)


@given(sets, sets)
def test_jaccard_exact_fractions(a, b):
    if not a and not b:
        return
    j = jaccard(a, b)
    assert j == jaccard(b, a)
    assert Fraction(j).limit_denominator(1000) == Fraction(len(a & b), len(a | b))
    assert 0.0 <= j <= 1.0
    d = jaccard_details(a, b)
    assert d.intersection <= min(len(a), len(b))


@given(sets.filter(bool))
def test_jaccard_identity(a):
    assert jaccard(a, a) == 1.0
    assert jaccard(a, frozenset(x + 100 for x in a)) == 0.0


def test_jaccard_examples_and_monotone():
    assert jaccard({1, 2, 3}, {2, 3, 4}) == 0.5
    # growing the intersection with a fixed union never lowers the coefficient
    u = set(range(6))
    assert jaccard({0, 1, 2, 3}, {0, 4, 5}) < jaccard({0, 1, 2, 3}, {0, 1, 4, 5}) < jaccard(u, u)


def test_both_empty_is_one_with_warning():
    with pytest.warns(UserWarning):
        assert jaccard(set(), set()) == 1.0
    assert jaccard_details(set(), set()).both_empty


def test_expert_panel_canonical_forms_are_distinct():
    syn = load_synonyms()
    forms = {canonicalize(parse_rule(r), syn) for _, r, _ in panel_matrix()}
    assert len(forms) == 21


def test_expert_panel_replay():
    syn = load_synonyms()
    sets = {p: load_rule_file(PANEL / f"{p}.txt") for p in PARTICIPANTS}
    rep = report(sets["we"], [(p, sets[p]) for p in PARTICIPANTS[1:]], syn, "we")
    assert [round(rep.jaccard[p], 1) for p in PARTICIPANTS[1:]] == [0.6, 0.7, 0.4]
    assert (rep.intersection["exp1"], rep.union["exp1"]) == (11, 18)
    by_rendering = dict(zip(rep.rules, rep.matrix))
    for no, rule, marks in panel_matrix():
        assert by_rendering[parse_rule(rule).render()] == marks, no


def test_report_trivial_cases():
    rules = [parse_rule("IF a = b THEN c"), parse_rule("IF d = e THEN f")]
    rep = report(rules, [("same", rules), ("none", [])])
    assert rep.jaccard == {"same": 1.0, "none": 0.0}
    assert all(row[:2] == [True, True] for row in rep.matrix)
    data = json.loads(rep.to_json())
    assert data["jaccard"]["same"] == 1.0 and len(data["rules"]) == 2
    text = rep.to_text()
    assert "✓" in text and "JC(system, none) = 0.0000" in text


def test_load_rule_file_formats(tmp_path):
    jl = tmp_path / "r.jsonl"
    jl.write_text(json.dumps({"conditions": [{"key": "a", "op": "=", "value": "b"}], "actions": ["c"]}) + "\n"
                  + "{broken\n")
    with pytest.raises(DataError, match=":2:"):
        load_rule_file(jl)
    txt = tmp_path / "r.txt"
    txt.write_text("# comment\nIF a = b THEN c\n\nnot a rule\n")
    with pytest.raises(DataError, match=":4:"):
        load_rule_file(txt)
