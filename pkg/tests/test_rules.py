import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpgrules.errors import DataError
from cpgrules.rules import (Action, ConditionTriple, Rule, normalize_op, parse_action, parse_condition,
                            parse_rule, rule_from_dict)


def test_render_and_parse_worked_rule():
    text = "IF Age Group = adult AND diabetes = Yes AND hypertension = Yes THEN SBP Goal < 130 mm Hg"
    rule = parse_rule(text)
    assert rule.conditions[0] == ConditionTriple("Age Group", "=", "adult")
    assert rule.actions[0] == Action(("130",), "SBP Goal", "<", "mm Hg")
    assert rule.render() == text


def test_parse_accepts_ascii_operators_and_trailing_period():
    rule = parse_rule("IF Age >= 60 AND   CKD != Yes THEN BP Goal <= 150/90 mm Hg.")
    assert [c.op for c in rule.conditions] == ["≥", "≠"]
    assert rule.render() == "IF Age ≥ 60 AND CKD ≠ Yes THEN BP Goal ≤ 150/90 mm Hg"


def test_bare_and_disjunctive_actions():
    a = parse_action("Calcium channel blocker OR Thiazide-type diuretic")
    assert a.key is None and a.values == ("Calcium channel blocker", "Thiazide-type diuretic")
    b = parse_action("Initial Therapy = ACE inhibitor OR ARB")
    assert b.key == "Initial Therapy" and b.values == ("ACE inhibitor", "ARB")


@pytest.mark.parametrize("bad", ["THEN x", "IF a = b", "IF THEN x", "IF a b THEN c"])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        parse_rule(bad)


def test_unknown_operator():
    with pytest.raises(ValueError):
        normalize_op("~")


def test_rule_needs_condition_and_action():
    with pytest.raises(ValueError):
        Rule((), (Action(("x",)),))
    with pytest.raises(ValueError):
        Rule((ConditionTriple("a", "=", "b"),), ())


def test_dict_round_trip():
    rule = Rule((ConditionTriple("SBP", "≥", "150", "mm Hg"),), (Action(("stroke",)),), ("doc", 3), "C-C",
                "high", ("consequence",))
    back = rule_from_dict(rule.to_dict())
    assert back == rule and back.render() == rule.render()
    with pytest.raises(DataError):
        rule_from_dict({"conditions": [{"key": "a"}], "actions": ["b"]})


word = st.text(alphabet="abcdefghijklmnopqrstuvwxyzABCDEFGHIJ-", min_size=1, max_size=8)
phrase = st.lists(word, min_size=1, max_size=3).map(" ".join).filter(
    lambda s: s.upper() not in {"IF", "THEN", "AND", "OR"} and not any(
        w.upper() in {"IF", "THEN", "AND", "OR"} for w in s.split()))
number = st.integers(0, 300).map(str) | st.tuples(st.integers(1, 200), st.integers(1, 120)).map(
    lambda t: f"{t[0]}/{t[1]}")
op = st.sampled_from(["=", "<", ">", "≤", "≥", "≠"])
condition = st.builds(ConditionTriple, phrase, op, phrase | number)
action = st.builds(Action, st.lists(phrase, min_size=1, max_size=3).map(tuple)) | st.builds(
    Action, st.tuples(phrase), phrase, op)


@settings(max_examples=300, deadline=None)
@given(st.lists(condition, min_size=1, max_size=4), st.lists(action, min_size=1, max_size=3))
def test_render_parse_round_trip(conds, acts):
    text = Rule(tuple(conds), tuple(acts)).render()
    assert parse_rule(text).render() == text


def test_condition_value_with_unit():
    c = parse_condition("SBP < 140 mm Hg")
    assert (c.key, c.op, c.value, c.unit) == ("SBP", "<", "140", "mm Hg")
