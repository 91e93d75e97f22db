"""Rule data types, rendering, and the plain-text rule grammar.

Canonical grammar::

    IF key op value [AND key op value ...] THEN action [AND action ...]

where op is one of = < > ≤ ≥ ≠ (ASCII <= >= != are accepted on input) and
an action is either ``key op value`` or a bare value; alternatives inside a
value are joined with `` OR ``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import DataError

OPERATORS = ("=", "<", ">", "≤", "≥", "≠")
OP_ALIASES = {"<=": "≤", "=<": "≤", ">=": "≥", "=>": "≥", "!=": "≠", "<>": "≠", "==": "="}

_OP_RE = re.compile(r"\s(<=|=<|>=|=>|!=|<>|==|=|<|>|≤|≥|≠)\s")
_RULE_RE = re.compile(r"^\s*IF\s+(.+?)\s+THEN\s+(.+?)\s*\.?\s*$", re.S)
_NUM_UNIT_RE = re.compile(r"^(\d+(?:[.,/:]\d+)*)\s+(\S.*)$")

SENTENCE_CLASSES = ("C-A", "C-C", "A")


def normalize_op(op: str) -> str:
    op = OP_ALIASES.get(op, op)
    if op not in OPERATORS:
        raise ValueError(f"unknown operator {op!r}")
    return op


@dataclass(frozen=True)
class ConditionTriple:
    key: str
    op: str
    value: str
    unit: Optional[str] = None
    span: Optional[tuple[int, int]] = field(default=None, compare=False)

    @property
    def value_text(self) -> str:
        return f"{self.value} {self.unit}" if self.unit else self.value

    def render(self) -> str:
        return f"{self.key} {self.op} {self.value_text}"

    def to_dict(self) -> dict:
        return {"key": self.key, "op": self.op, "value": self.value, "unit": self.unit}


@dataclass(frozen=True)
class Action:
    """An action term: ``key op value`` or a bare value; ``values`` are OR-alternatives."""
    values: tuple[str, ...]
    key: Optional[str] = None
    op: Optional[str] = None
    unit: Optional[str] = None
    span: Optional[tuple[int, int]] = field(default=None, compare=False)

    def render(self) -> str:
        value = " OR ".join(self.values)
        if self.unit:
            value = f"{value} {self.unit}"
        return f"{self.key} {self.op} {value}" if self.key else value


@dataclass(frozen=True)
class Rule:
    conditions: tuple[ConditionTriple, ...]
    actions: tuple[Action, ...]
    source: Optional[tuple[str, int]] = None
    sentence_class: Optional[str] = None
    confidence: str = "high"
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.conditions or not self.actions:
            raise ValueError("a rule needs at least one condition and one action")

    def render(self) -> str:
        return ("IF " + " AND ".join(c.render() for c in self.conditions)
                + " THEN " + " AND ".join(a.render() for a in self.actions))

    def to_dict(self) -> dict:
        return {
            "conditions": [c.to_dict() for c in self.conditions],
            "actions": [a.render() for a in self.actions],
            "source": {"doc": self.source[0], "sent": self.source[1]} if self.source else None,
            "class": self.sentence_class,
            "confidence": self.confidence,
            "flags": list(self.flags),
            "rendered": self.render(),
        }


def _split_value_unit(text: str, units=None) -> tuple[str, Optional[str]]:
    m = _NUM_UNIT_RE.match(text)
    if m and (units is None or m.group(2).lower() in units):
        return m.group(1), m.group(2)
    return text, None


def parse_condition(text: str) -> ConditionTriple:
    text = " ".join(text.split())
    m = _OP_RE.search(f" {text} ")
    if not m:
        raise ValueError(f"condition {text!r} has no operator")
    padded = f" {text} "
    key = padded[: m.start()].strip()
    value = padded[m.end():].strip()
    if not key or not value:
        raise ValueError(f"condition {text!r} needs a key and a value")
    value, unit = _split_value_unit(value)
    return ConditionTriple(key, normalize_op(m.group(1)), value, unit)


def parse_action(text: str) -> Action:
    text = " ".join(text.split())
    padded = f" {text} "
    m = _OP_RE.search(padded)
    if m and padded[: m.start()].strip():
        key = padded[: m.start()].strip()
        value = padded[m.end():].strip()
        value, unit = _split_value_unit(value)
        return Action(tuple(v.strip() for v in value.split(" OR ")), key, normalize_op(m.group(1)), unit)
    return Action(tuple(v.strip() for v in text.split(" OR ")))


def parse_rule(text: str) -> Rule:
    m = _RULE_RE.match(" ".join(text.split()))
    if not m:
        raise ValueError(f"not a rule of the form 'IF ... THEN ...': {text!r}")
    conditions = tuple(parse_condition(c) for c in m.group(1).split(" AND "))
    actions = tuple(parse_action(a) for a in m.group(2).split(" AND "))
    return Rule(conditions, actions)


def rule_from_dict(d: dict) -> Rule:
    try:
        conditions = tuple(ConditionTriple(c["key"], normalize_op(c["op"]), str(c["value"]), c.get("unit"))
                           for c in d["conditions"])
        actions = tuple(parse_action(a) for a in d["actions"])
        src = d.get("source")
        source = (src["doc"], src["sent"]) if src else None
        return Rule(conditions, actions, source, d.get("class"), d.get("confidence", "high"),
                    tuple(d.get("flags", ())))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad rule record: {exc}") from None
