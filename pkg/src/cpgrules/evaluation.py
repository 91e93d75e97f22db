"""Comparing extracted rule sets with expert rule sets (Jaccard coefficient)."""
from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from .errors import DataError
from .files import iter_jsonl
from .rules import Action, ConditionTriple, Rule, normalize_op, parse_rule, rule_from_dict
from .textprep import _data_path, read_lines

_ALT_SPLIT = re.compile(r"\s*,\s*(?:or\s+)?|\s+or\s+", re.I)
_QUOTES = "'\"`‘’“”"


def load_synonyms(path=None) -> dict[str, str]:
    path = path or _data_path("synonyms.tsv")
    out = {}
    for line in read_lines(path):
        variant, _, canonical = line.partition("\t")
        if not canonical.strip():
            raise DataError(f"expected variant<TAB>canonical, got {line!r}", path)
        out[" ".join(variant.lower().split())] = " ".join(canonical.lower().split())
    return out


def normalize_term(text: str, synonyms: Mapping[str, str] = {}) -> str:
    """Case-fold, strip quotes and trailing periods, collapse spaces, map synonyms to a fixpoint."""
    t = " ".join(text.lower().strip().strip(_QUOTES).rstrip(".").split()).strip(_QUOTES)
    seen = set()
    while t in synonyms and t not in seen:
        seen.add(t)
        t = synonyms[t]
    return t


@dataclass(frozen=True)
class CanonicalRule:
    conditions: frozenset                # {(key, op, value)}
    actions: frozenset                   # {(key, op, frozenset(alternatives))}
    rendered: str = field(default="", compare=False, hash=False)


def _canon_value(value: str, unit: Optional[str], synonyms) -> str:
    v = normalize_term(value, synonyms)
    if unit:
        v = f"{v} {normalize_term(unit, synonyms)}"
    return normalize_term(v, synonyms)


def _canon_alternatives(values, unit, synonyms) -> frozenset:
    alts = set()
    for v in values:
        for part in _ALT_SPLIT.split(v):
            if part.strip(" " + _QUOTES):
                alts.add(normalize_term(part, synonyms))
    if unit:
        alts = {normalize_term(f"{a} {normalize_term(unit, synonyms)}", synonyms) for a in alts}
    return frozenset(alts)


def canonicalize(rule: Union[Rule, CanonicalRule], synonyms: Mapping[str, str] = {}) -> CanonicalRule:
    """Order-insensitive, case-folded, synonym-mapped form used for set comparison.

    Accepts an already canonical rule, so applying it twice is a no-op.
    """
    if isinstance(rule, CanonicalRule):
        conds = frozenset((normalize_term(k, synonyms), normalize_op(o), normalize_term(v, synonyms))
                          for k, o, v in rule.conditions)
        acts = frozenset((normalize_term(k, synonyms), o, frozenset(normalize_term(x, synonyms) for x in alts))
                         for k, o, alts in rule.actions)
        return CanonicalRule(conds, acts, rule.rendered)
    conds = frozenset((normalize_term(c.key, synonyms), c.op, _canon_value(c.value, c.unit, synonyms))
                      for c in rule.conditions)
    acts = frozenset((normalize_term(a.key or "", synonyms), a.op or "", _canon_alternatives(a.values, a.unit, synonyms))
                     for a in rule.actions)
    return CanonicalRule(conds, acts, rule.render())


@dataclass(frozen=True)
class JaccardResult:
    value: float
    intersection: int
    union: int
    both_empty: bool = False


def jaccard_details(a, b) -> JaccardResult:
    a, b = set(a), set(b)
    inter, union = len(a & b), len(a | b)
    if union == 0:
        return JaccardResult(1.0, 0, 0, True)
    return JaccardResult(inter / union, inter, union)


def jaccard(a, b) -> float:
    """|A ∩ B| / |A ∪ B|; two empty sets give 1.0 with a warning."""
    res = jaccard_details(a, b)
    if res.both_empty:
        warnings.warn("Jaccard of two empty rule sets is undefined; returning 1.0", stacklevel=2)
    return res.value


@dataclass
class ComparisonReport:
    participants: list[str]              # system first, then experts
    rules: list[str]                     # representative rendering per distinct canonical rule
    matrix: list[list[bool]]             # matrix[rule][participant]
    jaccard: dict[str, float]
    intersection: dict[str, int]
    union: dict[str, int]
    both_empty: dict[str, bool]

    def to_dict(self) -> dict:
        return {
            "participants": self.participants,
            "jaccard": self.jaccard,
            "intersection": self.intersection,
            "union": self.union,
            "both_empty": self.both_empty,
            "rules": [{"rule": r, "extracted_by": dict(zip(self.participants, row))}
                      for r, row in zip(self.rules, self.matrix)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def to_text(self) -> str:
        width = max([4] + [len(r) for r in self.rules])
        width = min(width, 100)
        head = f"{'No':>3}  {'Rule':<{width}}  " + "  ".join(f"{p:^6}" for p in self.participants)
        lines = [head, "-" * len(head)]
        for i, (r, row) in enumerate(zip(self.rules, self.matrix), 1):
            text = r if len(r) <= width else r[: width - 3] + "..."
            lines.append(f"{i:>3}  {text:<{width}}  " + "  ".join(f"{'✓' if x else '✗':^6}" for x in row))
        lines.append("")
        system = self.participants[0]
        for p in self.participants[1:]:
            lines.append(f"JC({system}, {p}) = {self.jaccard[p]:.4f}  "
                         f"(|∩| = {self.intersection[p]}, |∪| = {self.union[p]})")
        return "\n".join(lines) + "\n"


def report(system: Sequence, experts: Sequence[tuple[str, Sequence]], synonyms: Mapping[str, str] = {},
           system_name: str = "system") -> ComparisonReport:
    """Match matrix over the union of all rules plus per-expert Jaccard against the system."""
    def canon(rules):
        return [canonicalize(r, synonyms) for r in rules]

    sys_rules = canon(system)
    exp_rules = [(name, canon(rs)) for name, rs in experts]
    participants = [system_name] + [name for name, _ in exp_rules]
    order: dict[CanonicalRule, str] = {}
    for rs in [sys_rules] + [rs for _, rs in exp_rules]:
        for r in rs:
            order.setdefault(r, r.rendered)
    sets = [set(sys_rules)] + [set(rs) for _, rs in exp_rules]
    matrix = [[r in s for s in sets] for r in order]
    jac, inter, union, empty = {}, {}, {}, {}
    for name, s in zip(participants[1:], sets[1:]):
        res = jaccard_details(sets[0], s)
        jac[name], inter[name], union[name], empty[name] = res.value, res.intersection, res.union, res.both_empty
    return ComparisonReport(participants, list(order.values()), matrix, jac, inter, union, empty)


def load_rule_file(path) -> list[Rule]:
    """Rules from JSONL (rule records) or plain text (one ``IF ... THEN ...`` per line)."""
    path = Path(path)
    if path.suffix == ".jsonl":
        out = []
        for line_no, obj in iter_jsonl(path):
            try:
                out.append(rule_from_dict(obj))
            except DataError as exc:
                raise DataError(str(exc), path, line_no) from None
        return out
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            try:
                out.append(parse_rule(line))
            except ValueError as exc:
                raise DataError(str(exc), path, line_no) from None
    return out


__all__ = ["Action", "CanonicalRule", "ComparisonReport", "ConditionTriple", "JaccardResult", "canonicalize",
           "jaccard", "jaccard_details", "load_rule_file", "load_synonyms", "normalize_term", "report"]
