import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpgrules.errors import ConfigError
from cpgrules.files import dumps_jsonl
from cpgrules.qualifiers import LEFT, RIGHT, QualifierEntry
from cpgrules.rulegen import (CategoryConfig, EmptyPhrase, NoActionFound, SemanticLexicon, assign_phrases,
                              default_resources, extract_action, extract_rules, extract_sentence,
                              extract_triples, find_qualifier, find_token_operator, split_on_qualifier)
from cpgrules.textprep import Document, _data_path, prepare_sentence

GOLDEN = Path(__file__).parent / "golden"
WORKED = ("The panel also recognizes that an SBP goal of lower than 130 mm Hg is commonly recommended "
          "for adults with diabetes and hypertension")
BLACK = ("In the black hypertensive population , including those with diabetes , a calcium channel blocker "
         "or thiazide-type diuretic is recommended as initial therapy")


@pytest.fixture(scope="module")
def res():
    return default_resources()


def tokens(text):
    return prepare_sentence(text).tokens


def mini_lexicon():
    return SemanticLexicon({"adults": ("Age Group", "adult"), "diabetes": ("Disease", "diabetes"),
                            "hypertension": ("Disease", "hypertension")})


# ---------------------------------------------------------------- qualifiers

def test_find_qualifier_worked_sentence(res):
    m = find_qualifier(prepare_sentence(WORKED), res.qualifiers)
    assert m.entry.phrase == "recommended for"


def test_find_qualifier_prefers_weight_then_length_then_left():
    s = prepare_sentence("use of aspirin is recommended for adults")
    q = [QualifierEntry("use of", 53, RIGHT, RIGHT), QualifierEntry("recommended for", 145, RIGHT, LEFT)]
    assert find_qualifier(s, q).entry.phrase == "recommended for"
    q3 = q + [QualifierEntry("is recommended for", 1, RIGHT, LEFT)]
    assert find_qualifier(s, q3).entry.phrase == "is recommended for"
    twice = prepare_sentence("leads to a and leads to b")
    assert find_qualifier(twice, [QualifierEntry("leads to", 1, LEFT, RIGHT)]).start == 0
    assert find_qualifier(prepare_sentence("nothing here"), q) is None


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(["a", "b", "leads", "to", ","]), min_size=2, max_size=15))
def test_split_partitions_tokens(words):
    s = prepare_sentence(" ".join(words))
    m = find_qualifier(s, [QualifierEntry("leads to", 1, LEFT, RIGHT)])
    if m is None:
        return
    left, right = split_on_qualifier(s, m)
    assert len(left) + (m.end - m.start) + len(right) == len(s.tokens)
    assert left + s.tokens[m.start:m.end] + right == s.tokens


def test_split_boundaries():
    q = [QualifierEntry("leads to", 1, LEFT, RIGHT)]
    s = prepare_sentence("leads to stroke")
    assert split_on_qualifier(s, find_qualifier(s, q))[0] == ()
    s = prepare_sentence("smoking leads to")
    assert split_on_qualifier(s, find_qualifier(s, q))[1] == ()


# ---------------------------------------------------------------- phrase assignment

def words(toks):
    return " ".join(t.surface for t in toks)


def test_assign_opposite_directions():
    left, right = tokens("smoking"), tokens("stroke")
    a = assign_phrases(QualifierEntry("leads to", 1, LEFT, RIGHT), left, right)
    assert (words(a.condition), words(a.action), a.low_confidence) == ("smoking", "stroke", False)
    b = assign_phrases(QualifierEntry("recommended for", 1, RIGHT, LEFT), left, right)
    assert (words(b.condition), words(b.action)) == ("stroke", "smoking")


def test_comma_heuristic(res):
    s = prepare_sentence(BLACK)
    m = find_qualifier(s, res.qualifiers)
    assert m.entry.phrase == "is recommended"
    parts = assign_phrases(m.entry, *split_on_qualifier(s, m))
    assert words(parts.condition) == "In the black hypertensive population , including those with diabetes"
    assert words(parts.action).startswith("a calcium channel blocker or thiazide-type diuretic")
    assert not parts.low_confidence


def test_same_side_without_comma_is_low_confidence():
    a = assign_phrases(QualifierEntry("x", 1, LEFT, LEFT), tokens("adults with diabetes"), tokens("aspirin"))
    assert (words(a.condition), words(a.action), a.low_confidence) == ("adults with diabetes", "aspirin", True)


def test_empty_phrase():
    with pytest.raises(EmptyPhrase) as exc:
        assign_phrases(QualifierEntry("leads to", 1, LEFT, RIGHT), (), tokens("stroke"))
    assert exc.value.side == "condition"


# ---------------------------------------------------------------- triples and operators

def test_triples_mini_lexicon():
    out = extract_triples(tokens("adults with diabetes and hypertension"), mini_lexicon(),
                          {"Age Group", "Disease"}, value_categories={"Age Group"})
    assert [c.render() for c in out] == ["Age Group = adult", "diabetes = Yes", "hypertension = Yes"]
    assert extract_triples(tokens("the panel met"), mini_lexicon(), {"Disease"}) == []


def test_triples_numeric_value(res):
    out = extract_triples(tokens("SBP goal of lower than 130 mm Hg"), res.lexicon, {"Clinical Goal"})
    assert [c.render() for c in out] == ["SBP Goal < 130 mm Hg"]


def test_triples_after_cue_and_negation(res):
    cc = res.categories.condition_categories
    out = extract_triples(tokens("adults aged 60 years or older"), res.lexicon, res.categories)
    assert [c.render() for c in out] == ["Age Group = adult", "Age ≥ 60 years"]
    out = extract_triples(tokens("patients with SBP of 150 mm Hg or higher"), res.lexicon, res.categories)
    assert [c.render() for c in out] == ["SBP ≥ 150 mm Hg"]
    neg = extract_triples(tokens("patients without diabetes"), res.lexicon, cc)
    assert [c.render() for c in neg] == ["diabetes = No"]


def test_key_spans_lie_in_phrase(res):
    phrase = prepare_sentence(WORKED).tokens[18:]
    for c in extract_triples(phrase, res.lexicon, res.categories):
        lo, hi = c.span
        assert phrase[0].index <= lo < hi <= phrase[-1].index + 1


def test_find_token_operator():
    assert find_token_operator(0, tokens("SBP lower than 130")) == "<"
    assert find_token_operator(0, tokens("age ≥ 60")) == "≥"
    assert find_token_operator(0, tokens("SBP 130")) == "="
    assert find_token_operator(0, tokens("SBP at least 130")) == "≥"
    assert find_token_operator(0, tokens("SBP at most 130")) == "≤"
    assert find_token_operator(0, tokens("SBP above 130")) == ">"
    assert find_token_operator(0, tokens("SBP not 130")) == "≠"


def test_longest_match_is_one_unit(res):
    ms = res.lexicon.mentions(["a", "calcium", "channel", "blocker"])
    assert [(m.term, m.start, m.end) for m in ms] == [("calcium channel blocker", 1, 4)]
    lex = SemanticLexicon({"beta blocker": ("Pharmacologic Substance", "beta blocker")})
    assert [m.term for m in lex.mentions(["beta", "blockers"])] == ["beta blocker"]


# ---------------------------------------------------------------- actions

def test_disjunctive_action_with_attribute(res):
    acts = extract_action(tokens("a calcium channel blocker or thiazide-type diuretic is recommended as "
                                 "initial therapy"), res.lexicon, res.categories)
    assert [a.render() for a in acts] == ["Initial Therapy = Calcium channel blocker OR Thiazide-type diuretic"]


def test_single_and_missing_actions(res):
    assert [a.render() for a in extract_action(tokens("an ACE inhibitor"), res.lexicon, res.categories)] == [
        "ACE inhibitor"]
    with pytest.raises(NoActionFound):
        extract_action(tokens("the panel met"), res.lexicon, res.categories)


# ---------------------------------------------------------------- categories

def test_category_config_validation():
    with pytest.raises(ConfigError):
        CategoryConfig(frozenset(), frozenset({"x"}))
    with pytest.raises(ConfigError):
        CategoryConfig(frozenset({"x"}), frozenset({"x"}))
    assert CategoryConfig(frozenset({"x"}), frozenset({"x"}), allow_overlap=True)


# ---------------------------------------------------------------- whole sentences

def test_worked_example_rule(res):
    rules, skips = extract_rules([prepare_sentence(WORKED, label="C-A")], resources=res)
    assert skips == []
    assert rules[0].render() == ("IF Age Group = adult AND diabetes = Yes AND hypertension = Yes "
                                 "THEN SBP Goal < 130 mm Hg")
    assert rules[0].sentence_class == "C-A" and rules[0].confidence == "high"


def test_black_population_rule(res):
    rule = extract_sentence(prepare_sentence(BLACK), "C-A", res)
    assert rule.render() == ("IF Race = black AND hypertension = Yes AND diabetes = Yes "
                             "THEN Initial Therapy = Calcium channel blocker OR Thiazide-type diuretic")


def test_consequence_and_action_only(res):
    cc = extract_sentence(prepare_sentence("Uncontrolled hypertension in adults leads to stroke ."), "C-C", res)
    assert "consequence" in cc.flags and cc.render().endswith("THEN stroke")
    a = extract_sentence(prepare_sentence("Initiate the treatment with an ACE inhibitor ."), "A", res)
    assert a.render() == "IF context = unresolved THEN ACE inhibitor"
    assert a.flags == ("needs-context",)


def test_skip_reasons(res):
    doc = Document("d", "The panel met twice. Aspirin works.")
    rules, skips = extract_rules(preprocess_labels(doc, "NA"), resources=res)
    assert rules == [] and {s.reason for s in skips} == {"class-NA"}
    s = extract_sentence(prepare_sentence("Aspirin works ."), "C-A", res)
    assert s.reason == "no-qualifier"
    s = extract_sentence(prepare_sentence("leads to stroke ."), "C-C", res)
    assert s.reason == "empty-condition-phrase"
    s = extract_sentence(prepare_sentence("the panel leads to stroke ."), "C-C", res)
    assert s.reason == "no-condition-found"


def preprocess_labels(doc, label):
    from dataclasses import replace

    from cpgrules.textprep import preprocess
    return [replace(s, label=label) for s in preprocess(doc)]


def test_regression_excerpt_matches_golden(res):
    text = _data_path("regression_excerpt.txt").read_text(encoding="utf-8")
    rules, skips = extract_rules(Document("regression_excerpt", text), resources=res)
    assert dumps_jsonl(r.to_dict() for r in rules) == (GOLDEN / "regression_rules.jsonl").read_text()
    assert dumps_jsonl(s.to_dict() for s in skips) == (GOLDEN / "regression_skips.jsonl").read_text()


def test_extraction_is_deterministic(res):
    text = _data_path("regression_excerpt.txt").read_text(encoding="utf-8")
    a = extract_rules(Document("x", text), resources=res)
    b = extract_rules(Document("x", text), resources=res)
    assert [r.to_dict() for r in a[0]] == [r.to_dict() for r in b[0]]
