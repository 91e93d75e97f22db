"""Rule extraction from classified guideline sentences.

Per sentence: classify, pick the best qualifier, split the sentence around
it, decide which side holds the condition and which the action (comma
heuristic when both lie on the same side), then turn typed lexicon mentions
into ``key op value`` triples using a small context window.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from nltk.stem.porter import PorterStemmer

from .errors import ConfigError, CpgRulesError, DataError
from .qualifiers import LEFT, RIGHT, QualifierEntry
from .rules import Action, ConditionTriple, Rule, normalize_op
from .textprep import Document, SentenceRecord, Token, _data_path, default_stopwords, preprocess, read_lines

log = logging.getLogger(__name__)

_stemmer = PorterStemmer()

SYMBOL_OPERATORS = {"<": "<", ">": ">", "≤": "≤", "≥": "≥", "=": "=", "≠": "≠",
                    "< =": "≤", "> =": "≥", "! =": "≠", "=<": "≤", "=>": "≥"}
BARRIERS = frozenset({",", ";", ":", "(", ")", "."})
_JOINERS = frozenset({"or", "and/or", ",", "a", "an", "the", "either"})


class EmptyPhrase(CpgRulesError):
    def __init__(self, side: str):
        self.side = side
        super().__init__(f"{side} phrase is empty")


class NoActionFound(CpgRulesError):
    pass


# ---------------------------------------------------------------- resources

@dataclass(frozen=True)
class Mention:
    start: int          # offsets into the token sequence that was scanned
    end: int
    term: str
    type: str
    preferred: str


class SemanticLexicon:
    """Term (1-3+ words) -> semantic type, with greedy longest-match lookup.

    Matching tries lowercase word forms first and falls back to Porter stems,
    so plural forms of listed terms still resolve.
    """

    def __init__(self, entries: dict[str, tuple[str, str]]):
        self.entries = {" ".join(k.lower().split()): v for k, v in entries.items()}
        self.max_len = max((len(k.split()) for k in self.entries), default=0)
        self._stems: dict[str, str] = {}
        for term in self.entries:
            self._stems.setdefault(self._stem_key(term.split()), term)

    @staticmethod
    def _stem_key(words) -> str:
        return " ".join(_stemmer.stem(w) for w in words)

    @property
    def types(self) -> frozenset[str]:
        return frozenset(t for t, _ in self.entries.values())

    @classmethod
    def load(cls, path=None) -> "SemanticLexicon":
        path = path or _data_path("semantic_lexicon.tsv")
        entries = {}
        for line in read_lines(path):
            cols = [c.strip() for c in line.split("\t")]
            if len(cols) < 2 or not cols[0] or not cols[1]:
                raise DataError(f"expected term<TAB>semantic_type[<TAB>preferred], got {line!r}", path)
            entries[cols[0]] = (cols[1], cols[2] if len(cols) > 2 and cols[2] else cols[0])
        return cls(entries)

    def lookup(self, term: str) -> Optional[tuple[str, str]]:
        return self.entries.get(" ".join(term.lower().split()))

    def mentions(self, words: Sequence[str]) -> list[Mention]:
        words = [w.lower() for w in words]
        out, i = [], 0
        while i < len(words):
            hit = None
            for n in range(min(self.max_len, len(words) - i), 0, -1):
                chunk = words[i:i + n]
                term = " ".join(chunk)
                if term not in self.entries:
                    term = self._stems.get(self._stem_key(chunk))
                if term is not None:
                    hit = Mention(i, i + n, term, *self.entries[term])
                    break
            if hit:
                out.append(hit)
                i = hit.end
            else:
                i += 1
        return out


@dataclass(frozen=True)
class CategoryConfig:
    condition_categories: frozenset[str]
    action_categories: frozenset[str]
    value_categories: frozenset[str] = frozenset()
    action_attribute_categories: frozenset[str] = frozenset({"Therapy"})
    allow_overlap: bool = False

    def __post_init__(self):
        if not self.condition_categories or not self.action_categories:
            raise ConfigError("condition and action categories must both be non-empty")
        overlap = self.condition_categories & self.action_categories
        if overlap and not self.allow_overlap:
            raise ConfigError(f"categories {sorted(overlap)} are both condition and action; "
                              'set "allow_overlap": true to permit this')

    @classmethod
    def load(cls, path=None) -> "CategoryConfig":
        path = path or _data_path("categories.json")
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        try:
            return cls(frozenset(d["condition_categories"]), frozenset(d["action_categories"]),
                       frozenset(d.get("value_categories", ())),
                       frozenset(d.get("action_attribute_categories", ("Therapy",))),
                       bool(d.get("allow_overlap", False)))
        except KeyError as exc:
            raise ConfigError(f"{path}: missing {exc.args[0]!r}") from None


@dataclass(frozen=True)
class OperatorCues:
    before_value: dict[str, str]
    after_value: dict[str, str]
    negations: frozenset[str]

    @classmethod
    def load(cls, path=None) -> "OperatorCues":
        path = path or _data_path("operator_cues.json")
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        before = {k.lower(): normalize_op(v) for k, v in d.get("before_value", {}).items()}
        before.update(SYMBOL_OPERATORS)
        after = {k.lower(): normalize_op(v) for k, v in d.get("after_value", {}).items()}
        return cls(before, after, frozenset(w.lower() for w in d.get("negations", ())))

    @property
    def max_len(self) -> int:
        return max(len(k.split()) for k in list(self.before_value) + list(self.after_value))


def load_units(path=None) -> list[tuple[str, ...]]:
    path = path or _data_path("units.txt")
    units = {tuple(line.lower().split()) for line in read_lines(path)}
    return sorted(units, key=lambda u: (-len(u), u))


# ---------------------------------------------------------------- qualifiers

@dataclass(frozen=True)
class QualifierMatch:
    entry: QualifierEntry
    start: int
    end: int


def find_qualifier(sentence: SentenceRecord, qualifiers: Iterable[QualifierEntry]) -> Optional[QualifierMatch]:
    """Longest matching qualifier; ties go to higher weight, then the leftmost span."""
    words = sentence.normalized
    best, best_key = None, None
    for q in qualifiers:
        qt = q.tokens
        n = len(qt)
        for i in range(len(words) - n + 1):
            if tuple(words[i:i + n]) == qt:
                key = (-n, -q.weight, i, q.phrase)
                if best_key is None or key < best_key:
                    best, best_key = QualifierMatch(q, i, i + n), key
    return best


def split_on_qualifier(sentence: SentenceRecord, match: QualifierMatch):
    tokens = sentence.tokens
    return tokens[: match.start], tokens[match.end:]


@dataclass(frozen=True)
class PhraseAssignment:
    condition: tuple[Token, ...]
    action: tuple[Token, ...]
    low_confidence: bool = False


def _content(tokens) -> bool:
    return any(not t.is_punct for t in tokens)


def assign_phrases(entry: QualifierEntry, left, right) -> PhraseAssignment:
    """Decide condition and action phrases from the qualifier's directions.

    When both directions point to the same side, the comma on that side
    closest to the qualifier separates them: the part next to the qualifier
    is the action (together with the opposite side), the rest the condition.
    Without such a comma the shared side becomes the condition and the
    opposite side the action, flagged low-confidence.
    """
    left, right = tuple(left), tuple(right)
    low = False
    if entry.cond_dir == LEFT and entry.act_dir == RIGHT:
        condition, action = left, right
    elif entry.cond_dir == RIGHT and entry.act_dir == LEFT:
        condition, action = right, left
    elif entry.cond_dir == LEFT:
        commas = [i for i, t in enumerate(left) if t.surface == "," and _content(left[i + 1:]) and _content(left[:i])]
        if commas:
            k = commas[-1]
            condition, action = left[:k], left[k + 1:] + right
        else:
            condition, action, low = left, right, True
    else:
        commas = [i for i, t in enumerate(right) if t.surface == "," and _content(right[:i]) and _content(right[i + 1:])]
        if commas:
            k = commas[0]
            condition, action = right[k + 1:], left + right[:k]
        else:
            condition, action, low = right, left, True
    if not _content(condition):
        raise EmptyPhrase("condition")
    if not _content(action):
        raise EmptyPhrase("action")
    return PhraseAssignment(condition, action, low)


# ---------------------------------------------------------------- triples

@dataclass(frozen=True)
class _Unit:
    kind: str                 # "mention", "cue", "after", "value", "neg", "barrier"
    start: int                # offsets into the phrase
    end: int
    mention: Optional[Mention] = None
    op: Optional[str] = None
    value: Optional[str] = None
    unit: Optional[str] = None


def _units(tokens: Sequence[Token], lexicon: SemanticLexicon, cues: OperatorCues,
           units: Sequence[tuple[str, ...]], stops) -> list[_Unit]:
    words = [t.normalized for t in tokens]
    mentions = {m.start: m for m in lexicon.mentions(words)}
    out, i = [], 0
    cue_len = cues.max_len
    while i < len(tokens):
        if i in mentions:
            m = mentions[i]
            out.append(_Unit("mention", m.start, m.end, mention=m))
            i = m.end
            continue
        hit = None
        for n in range(min(cue_len, len(words) - i), 0, -1):
            phrase = " ".join(words[i:i + n])
            if phrase in cues.before_value:
                hit = _Unit("cue", i, i + n, op=cues.before_value[phrase])
            elif phrase in cues.after_value:
                hit = _Unit("after", i, i + n, op=cues.after_value[phrase])
            if hit:
                break
        if hit:
            out.append(hit)
            i = hit.end
            continue
        tok = tokens[i]
        if tok.is_numeric:
            j = i + 1
            unit_text = None
            for u in units:
                if tuple(words[j:j + len(u)]) == u:
                    unit_text = " ".join(t.surface for t in tokens[j:j + len(u)])
                    j += len(u)
                    break
            out.append(_Unit("value", i, j, value=tok.surface, unit=unit_text))
            i = j
            continue
        if words[i] in cues.negations:
            out.append(_Unit("neg", i, i + 1))
        elif words[i] in BARRIERS:
            out.append(_Unit("barrier", i, i + 1))
        elif tok.is_punct or words[i] in stops:
            pass
        else:
            out.append(_Unit("word", i, i + 1))
        i += 1
    return out


def _scan(units: list[_Unit], p: int, step: int, window: int, keys: set[int]):
    """Units within ``window`` of position ``p`` in one direction, stopping at barriers and other keys."""
    seen = []
    q = p + step
    while 0 <= q < len(units) and len(seen) < window:
        u = units[q]
        if u.kind == "barrier" or q in keys:
            break
        seen.append((q, u))
        q += step
    return seen


def _resolve(units, p, window, keys):
    """(op, value unit or None, negated) for the key at unit position ``p``.

    The nearest value unit within ``window`` wins (right side on ties).  A
    "before" cue between key and value, or an "after" cue right behind the
    value, sets the operator; a negation sets ``≠`` when no cue does.
    """
    right = _scan(units, p, 1, window, keys)
    left = _scan(units, p, -1, window, keys)
    negated = p > 0 and units[p - 1].kind == "neg"
    candidates = [(d, 0, q) for d, (q, u) in enumerate(right) if u.kind == "value"]
    candidates += [(d, 1, q) for d, (q, u) in enumerate(left) if u.kind == "value"]
    if not candidates:
        return None, None, negated
    q = min(candidates)[2]
    op = None
    lo, hi = sorted((p, q))
    for u in units[lo + 1:hi]:
        if u.kind == "cue":
            op = u.op
        elif u.kind == "neg":
            negated = True
    if q < p and q > 0 and units[q - 1].kind == "cue":
        op = units[q - 1].op
    if q + 1 < len(units) and units[q + 1].kind == "after":
        op = units[q + 1].op
    if q > 0 and units[q - 1].kind == "neg":
        negated = True
    if op is None:
        op = "≠" if negated else "="
    return op, units[q], negated


def find_token_operator(key_index: int, context: Sequence[Token], cues: Optional[OperatorCues] = None) -> str:
    """Operator for the key token at ``key_index`` of ``context`` (its window).

    With a value in the context the cue governing that value decides; with
    none, a negation gives ``≠`` and any other cue its own operator.
    """
    cues = cues or default_resources().cues
    units = _units(tuple(context), SemanticLexicon({}), cues, default_resources().units, default_stopwords())
    p = next((i for i, u in enumerate(units) if u.start <= key_index < u.end), None)
    if p is None:
        return "="
    op, value, negated = _resolve(units, p, len(units), set())
    if value is not None:
        return op
    if negated or any(u.kind == "neg" for u in units):
        return "≠"
    return next((u.op for u in units if u.kind in ("cue", "after")), "=")


def extract_triples(phrase: Sequence[Token], lexicon: SemanticLexicon, categories, window: int = 2,
                    cues: Optional[OperatorCues] = None, units=None, value_categories=frozenset(),
                    stoplist=None, default_yes: bool = True) -> list[ConditionTriple]:
    """⟨key, operator, value⟩ triples for every mention whose type is in ``categories``.

    Keys of a value category (for example "Age Group") become
    ``type = preferred term``; other keys take the nearest number within
    ``window`` context units (with its unit) or default to ``= Yes``
    (``= No`` when negated).
    """
    if isinstance(categories, CategoryConfig):
        value_categories = value_categories or categories.value_categories
        categories = categories.condition_categories
    cues = cues or default_resources().cues
    units = units if units is not None else default_resources().units
    stops = default_stopwords() if stoplist is None else stoplist
    phrase = tuple(phrase)
    seq = _units(phrase, lexicon, cues, units, stops)
    keys = {i for i, u in enumerate(seq) if u.kind == "mention" and u.mention.type in categories}
    out: list[ConditionTriple] = []
    for p in sorted(keys):
        m = seq[p].mention
        span = (phrase[m.start].index, phrase[m.end - 1].index + 1)
        negated = p > 0 and seq[p - 1].kind == "neg"
        if m.type in value_categories:
            triple = ConditionTriple(m.type, "≠" if negated else "=", m.preferred, None, span)
        else:
            op, value, negated = _resolve(seq, p, window, keys)
            if value is not None:
                triple = ConditionTriple(m.preferred, op, value.value, value.unit, span)
            elif default_yes:
                triple = ConditionTriple(m.preferred, "=", "No" if negated else "Yes", None, span)
            else:
                continue
        if triple not in out:
            out.append(triple)
    return out


def extract_action(phrase: Sequence[Token], lexicon: SemanticLexicon, categories: CategoryConfig,
                   window: int = 2, cues: Optional[OperatorCues] = None, units=None,
                   stoplist=None) -> list[Action]:
    """Action terms typed in the action categories, in sentence order.

    Numeric-valued terms become ``key op value``; bare terms coordinated by
    "or" form one disjunctive value, which is attached to a preceding or
    following attribute term (such as "initial therapy") when one is present.
    """
    cues = cues or default_resources().cues
    units = units if units is not None else default_resources().units
    stops = default_stopwords() if stoplist is None else stoplist
    phrase = tuple(phrase)
    words = [t.normalized for t in phrase]
    seq = _units(phrase, lexicon, cues, units, stops)
    ac = categories.action_categories
    keys = {i for i, u in enumerate(seq) if u.kind == "mention" and u.mention.type in ac}

    items: list[tuple[int, Union[Action, str, list]]] = []   # (phrase offset, item)
    attributes: list[tuple[int, Mention]] = []
    group: list[Mention] = []

    def close_group():
        if group:
            items.append((group[0].start, [g.preferred for g in group]))
            group.clear()

    for p in sorted(keys):
        m = seq[p].mention
        if m.type in categories.action_attribute_categories:
            close_group()
            attributes.append((m.start, m))
            continue
        op, value, _ = _resolve(seq, p, window, keys)
        if value is not None:
            close_group()
            span = (phrase[m.start].index, phrase[value.end - 1].index + 1)
            items.append((m.start, Action((value.value,), m.preferred, op, value.unit, span)))
            continue
        if group:
            between = words[group[-1].end:m.start]
            if ("or" in between or "and/or" in between) and all(w in _JOINERS for w in between):
                group.append(m)
                continue
            close_group()
        group.append(m)
    close_group()

    actions: list[tuple[int, Action]] = []
    for pos, item in items:
        if isinstance(item, list):
            actions.append((pos, Action(tuple(dict.fromkeys(item)))))
        else:
            actions.append((pos, item))
    for pos, attr in attributes:
        bare = [i for i, (_, a) in enumerate(actions) if a.key is None]
        if bare:
            i = min(bare, key=lambda i: (abs(actions[i][0] - pos), i))
            where, a = actions[i]
            actions[i] = (min(pos, where), Action(a.values, attr.preferred, "="))
        else:
            actions.append((pos, Action((attr.preferred,))))
    actions.sort(key=lambda pa: pa[0])
    if not actions:
        raise NoActionFound("no action-typed term in the action phrase")
    return [a for _, a in actions]


# ---------------------------------------------------------------- pipeline

@dataclass(frozen=True)
class Skip:
    doc: str
    sent: int
    reason: str
    detail: str = ""

    def to_dict(self) -> dict:
        d = {"doc": self.doc, "sent": self.sent, "reason": self.reason}
        if self.detail:
            d["detail"] = self.detail
        return d


@dataclass(frozen=True)
class Resources:
    qualifiers: tuple[QualifierEntry, ...]
    lexicon: SemanticLexicon
    categories: CategoryConfig
    cues: OperatorCues
    units: tuple[tuple[str, ...], ...]
    stoplist: frozenset[str] = field(default_factory=default_stopwords)
    window: int = 2


_DEFAULT = None


def default_resources() -> Resources:
    global _DEFAULT
    if _DEFAULT is None:
        from .qualifiers import load_seed_lexicon
        _DEFAULT = Resources(tuple(load_seed_lexicon()), SemanticLexicon.load(), CategoryConfig.load(),
                             OperatorCues.load(), tuple(load_units()))
    return _DEFAULT


def extract_sentence(sentence: SentenceRecord, label: str, res: Resources) -> Union[Rule, Skip]:
    """Rule for one classified sentence, or a Skip carrying the reason."""
    doc, sent = sentence.doc_id, sentence.sent_index

    def skip(reason, detail=""):
        return Skip(doc, sent, reason, detail)

    if label == "NA":
        return skip("class-NA")
    if not sentence.tokens:
        return skip("empty-sentence")
    match = find_qualifier(sentence, res.qualifiers)
    flags = []
    if label == "A":
        action_phrase = sentence.tokens
        if match is not None:
            left, right = split_on_qualifier(sentence, match)
            try:
                action_phrase = assign_phrases(match.entry, left, right).action
            except EmptyPhrase:
                action_phrase = left + right
        actions = None
        for phrase in dict.fromkeys((tuple(action_phrase), tuple(sentence.tokens))):
            try:
                actions = extract_action(phrase, res.lexicon, res.categories, res.window, res.cues,
                                         res.units, res.stoplist)
                break
            except NoActionFound:
                continue
        if actions is None:
            return skip("no-action-found")
        placeholder = ConditionTriple("context", "=", "unresolved")
        return Rule((placeholder,), tuple(actions), (doc, sent), label, "low", ("needs-context",))

    if match is None:
        return skip("no-qualifier")
    left, right = split_on_qualifier(sentence, match)
    try:
        parts = assign_phrases(match.entry, left, right)
    except EmptyPhrase as exc:
        return skip(f"empty-{exc.side}-phrase", match.entry.phrase)
    conditions = extract_triples(parts.condition, res.lexicon, res.categories.condition_categories, res.window,
                                 res.cues, res.units, res.categories.value_categories, res.stoplist)
    if not conditions:
        return skip("no-condition-found", match.entry.phrase)
    try:
        actions = extract_action(parts.action, res.lexicon, res.categories, res.window, res.cues, res.units,
                                 res.stoplist)
    except NoActionFound:
        return skip("no-action-found", match.entry.phrase)
    if parts.low_confidence:
        flags.append("low-confidence")
    if label == "C-C":
        flags.append("consequence")
    return Rule(tuple(conditions), tuple(actions), (doc, sent), label,
                "low" if parts.low_confidence else "high", tuple(flags))


def extract_rules(doc: Union[Document, Sequence[SentenceRecord]], model=None, resources: Optional[Resources] = None,
                  table=None) -> tuple[list[Rule], list[Skip]]:
    """Classify every sentence, keep C-A / C-C / A, and extract one rule per sentence.

    Without a model, a sentence's gold label is used when present and
    otherwise it is treated as C-A.  Per-sentence failures become skips.
    """
    res = resources or default_resources()
    sentences = preprocess(doc) if isinstance(doc, Document) else list(doc)
    rules, skips = [], []
    for s in sentences:
        if model is not None and s.tokens:
            label = model.predict(s, table)[0]
        else:
            label = s.label or "C-A"
        out = extract_sentence(s, label, res)
        (rules if isinstance(out, Rule) else skips).append(out)
    return rules, skips
