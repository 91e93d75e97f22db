"""Qualifier mining: score bigrams against sentence classes, filter, expand with embeddings.

Each candidate bigram is reduced to a presence/absence indicator per sentence
and scored against the class labels with four metrics (max one-vs-rest
correlation, Gini decrease, information gain, gain ratio).  Every metric is
min-max scaled to [0, 100] over the candidates and the four are summed.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .embeddings import EmbeddingTable
from .errors import DataError, InsufficientData
from .files import atomic_write
from .textprep import LABELS, SentenceRecord, _data_path, default_stopwords

log = logging.getLogger(__name__)

LEFT, RIGHT = "LEFT", "RIGHT"
DIRECTIONS = (LEFT, RIGHT)
METRICS = ("correlation", "gini", "infogain", "gainratio")


@dataclass(frozen=True)
class WeightedTerm:
    term: str
    w_correlation: float
    w_gini: float
    w_infogain: float
    w_gainratio: float
    aggregate: float
    df: int = 0
    raw: dict = field(default_factory=dict, compare=False, hash=False)


@dataclass(frozen=True)
class QualifierEntry:
    phrase: str
    weight: float
    cond_dir: str
    act_dir: str
    origin: str = "seed"            # "seed", "mined" or "expanded"
    parent: Optional[str] = None    # set for expanded entries

    def __post_init__(self):
        if self.cond_dir not in DIRECTIONS or self.act_dir not in DIRECTIONS:
            raise ValueError(f"qualifier {self.phrase!r}: directions must be LEFT or RIGHT")

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(self.phrase.split())

    @property
    def origin_label(self) -> str:
        return f"expanded({self.parent})" if self.origin == "expanded" else self.origin


@dataclass
class ExpansionMatrix:
    """Sparse qualifier x candidate similarity matrix; only entries >= alpha are stored."""
    rows: list[str]
    columns: list[str]
    alpha: float
    entries: dict[tuple[int, int], float] = field(default_factory=dict)

    def __getitem__(self, key: tuple[int, int]) -> float:
        return self.entries.get(key, 0.0)

    def row(self, i: int) -> dict[str, float]:
        return {self.columns[j]: s for (r, j), s in sorted(self.entries.items()) if r == i}


# ---------------------------------------------------------------- counting

class BigramCounts:
    """Per-class sentence frequencies of bigrams; mergeable across workers."""

    def __init__(self, labels: Sequence[str] = LABELS):
        self.labels = tuple(labels)
        self.class_totals = Counter()
        self.present: dict[str, Counter] = {}

    def add(self, sentence: SentenceRecord) -> None:
        self.class_totals[sentence.label] += 1
        toks = sentence.tokens
        seen = set()
        for a, b in zip(toks, toks[1:]):
            if a.is_punct or b.is_punct:
                continue
            seen.add(f"{a.normalized} {b.normalized}")
        for bg in seen:
            self.present.setdefault(bg, Counter())[sentence.label] += 1

    def merge(self, other: "BigramCounts") -> "BigramCounts":
        out = BigramCounts(self.labels)
        out.class_totals = self.class_totals + other.class_totals
        for src in (self.present, other.present):
            for bg, c in src.items():
                out.present.setdefault(bg, Counter()).update(c)
        return out

    @property
    def n(self) -> int:
        return sum(self.class_totals.values())


def count_bigrams(corpus: Iterable[SentenceRecord]) -> BigramCounts:
    counts = BigramCounts()
    for s in corpus:
        if s.label is None:
            raise InsufficientData(f"sentence {s.doc_id}#{s.sent_index} has no label")
        counts.add(s)
    return counts


# ---------------------------------------------------------------- metrics

def _entropy(p: np.ndarray, axis=-1) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return terms.sum(axis=axis)


def raw_metrics(present: np.ndarray, class_totals: np.ndarray) -> dict[str, np.ndarray]:
    """Metrics for an (m, k) matrix of per-class presence counts.

    ``class_totals`` is the (k,) vector of sentences per class.
    """
    present = np.asarray(present, dtype=np.float64)
    totals = np.asarray(class_totals, dtype=np.float64)
    absent = totals[None, :] - present
    n = totals.sum()
    n1 = present.sum(axis=1)
    n0 = n - n1
    px1, px0 = n1 / n, n0 / n

    with np.errstate(divide="ignore", invalid="ignore"):
        p_c_given_1 = np.where(n1[:, None] > 0, present / np.where(n1 > 0, n1, 1)[:, None], 0.0)
        p_c_given_0 = np.where(n0[:, None] > 0, absent / np.where(n0 > 0, n0, 1)[:, None], 0.0)
    prior = totals / n

    h_class = _entropy(prior)
    ig = h_class - (px1 * _entropy(p_c_given_1) + px0 * _entropy(p_c_given_0))
    ig = np.maximum(ig, 0.0)

    g_class = 1.0 - np.sum(prior ** 2)
    gini = g_class - (px1 * (1.0 - np.sum(p_c_given_1 ** 2, axis=1)) + px0 * (1.0 - np.sum(p_c_given_0 ** 2, axis=1)))
    gini = np.maximum(gini, 0.0)

    h_split = _entropy(np.stack([px1, px0], axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(h_split > 0, ig / np.where(h_split > 0, h_split, 1.0), 0.0)

    # phi coefficient of presence vs. one-vs-rest class indicator, per class
    n11 = present
    n10 = n1[:, None] - present
    n01 = absent
    n00 = n0[:, None] - absent
    ny1 = totals[None, :]
    ny0 = n - ny1
    denom = np.sqrt(n1[:, None] * n0[:, None] * ny1 * ny0)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(denom > 0, (n11 * n00 - n10 * n01) / np.where(denom > 0, denom, 1.0), 0.0)
    corr = np.abs(phi).max(axis=1)

    return {"correlation": corr, "gini": gini, "infogain": ig, "gainratio": ratio}


def minmax_100(values: np.ndarray) -> np.ndarray:
    """Scale to [0, 100]; a constant column maps to 100 when positive, else 0."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return values
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.full_like(values, 100.0 if hi > 0 else 0.0)
    return (values - lo) / (hi - lo) * 100.0


def score_terms(corpus: Sequence[SentenceRecord], min_df: int = 3) -> list[WeightedTerm]:
    counts = count_bigrams(corpus)
    return score_counts(counts, min_df)


def score_counts(counts: BigramCounts, min_df: int = 3) -> list[WeightedTerm]:
    present_classes = [c for c in counts.labels if counts.class_totals[c] > 0]
    if len(present_classes) < 2:
        raise InsufficientData("qualifier scoring needs at least two classes")
    terms = sorted(bg for bg, c in counts.present.items() if sum(c.values()) >= min_df)
    if not terms:
        return []
    P = np.array([[counts.present[t][c] for c in counts.labels] for t in terms], dtype=np.float64)
    totals = np.array([counts.class_totals[c] for c in counts.labels], dtype=np.float64)
    raw = raw_metrics(P, totals)
    norm = {k: minmax_100(v) for k, v in raw.items()}
    out = []
    for i, t in enumerate(terms):
        ws = [float(norm[k][i]) for k in METRICS]
        out.append(WeightedTerm(t, *ws, aggregate=float(sum(ws)), df=int(P[i].sum()),
                                raw={k: float(raw[k][i]) for k in METRICS}))
    out.sort(key=lambda w: (-w.aggregate, w.term))
    return out


def filter_qualifiers(terms: Sequence[WeightedTerm], threshold: float = 50) -> list[WeightedTerm]:
    return [t for t in terms if t.aggregate > threshold]


def attach_directions(terms: Sequence[WeightedTerm], seeds: Sequence[QualifierEntry]):
    """Give mined terms directions from the seed lexicon.

    Returns ``(lexicon, unassigned)``: lexicon holds every seed (re-weighted and
    marked "mined" when it was also mined) plus nothing else; ``unassigned``
    lists mined terms with no known directions, which stay inactive.
    """
    by_phrase = {s.phrase: s for s in seeds}
    mined = {t.term: t for t in terms}
    lexicon = []
    for s in seeds:
        t = mined.get(s.phrase)
        if t is None:
            lexicon.append(s)
        else:
            lexicon.append(QualifierEntry(s.phrase, t.aggregate, s.cond_dir, s.act_dir, "mined"))
    unassigned = [t for t in terms if t.term not in by_phrase]
    return lexicon, unassigned


# ---------------------------------------------------------------- expansion

def expand_qualifiers(qualifiers: Sequence[QualifierEntry], table: EmbeddingTable, alpha: float = 0.5,
                      stoplist=None, top_k: Optional[int] = None):
    """Add embedding neighbours of each qualifier with cosine >= ``alpha``.

    Candidates are the table's terms, excluding stop words, terms without a
    letter, and phrases already in the set.  A candidate reached from several qualifiers keeps the most
    similar parent and inherits that parent's directions and weight.

    Returns ``(entries, matrix, skipped)``; ``skipped`` names qualifiers with no vector.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    stops = default_stopwords() if stoplist is None else frozenset(stoplist)
    existing = {q.phrase for q in qualifiers}
    columns = [t.replace("_", " ") for t in table.terms]
    allowed = np.array([c not in stops and c not in existing and any(ch.isalpha() for ch in c)
                        for c in columns], dtype=bool)
    matrix = ExpansionMatrix([q.phrase for q in qualifiers], columns, alpha)
    skipped = []
    best: dict[int, tuple[float, int]] = {}
    for i, q in enumerate(qualifiers):
        vec = table.phrase_vector(q.phrase)
        if vec is None or not np.any(vec):
            log.warning("qualifier %r has no vector; skipped", q.phrase)
            skipped.append(q.phrase)
            continue
        sims = table.similarities(vec)
        hits = np.flatnonzero((sims >= alpha) & allowed)
        if top_k is not None:
            hits = sorted(hits, key=lambda j: (-sims[j], columns[j]))[:top_k]
        for j in hits:
            s = float(sims[j])
            matrix.entries[(i, int(j))] = s
            prev = best.get(int(j))
            if prev is None or s > prev[0]:
                best[int(j)] = (s, i)
    expanded = []
    for j in sorted(best, key=lambda j: columns[j]):
        _, i = best[j]
        parent = qualifiers[i]
        expanded.append(QualifierEntry(columns[j], parent.weight, parent.cond_dir, parent.act_dir,
                                       "expanded", parent.phrase))
    return list(qualifiers) + expanded, matrix, skipped


# ---------------------------------------------------------------- files

def _fmt(w: float) -> str:
    return str(int(w)) if float(w).is_integer() else f"{w:.6f}"


def load_qualifier_lexicon(path=None) -> list[QualifierEntry]:
    """TSV ``phrase weight cond_dir act_dir origin``; duplicate phrases keep the max weight."""
    path = path or _data_path("seed_qualifiers.tsv")
    entries: dict[str, QualifierEntry] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) < 4:
                raise DataError("expected phrase<TAB>weight<TAB>cond_dir<TAB>act_dir[<TAB>origin]", path, line_no)
            phrase = " ".join(cols[0].lower().split())
            try:
                weight = float(cols[1])
            except ValueError:
                raise DataError(f"bad weight {cols[1]!r}", path, line_no) from None
            origin_text = cols[4].strip() if len(cols) > 4 and cols[4].strip() else "seed"
            origin, parent = origin_text, None
            if origin_text.startswith("expanded(") and origin_text.endswith(")"):
                origin, parent = "expanded", origin_text[len("expanded("):-1]
            try:
                entry = QualifierEntry(phrase, weight, cols[2].strip().upper(), cols[3].strip().upper(), origin, parent)
            except ValueError as exc:
                raise DataError(str(exc), path, line_no) from None
            if phrase not in entries or entry.weight > entries[phrase].weight:
                entries[phrase] = entry
    return list(entries.values())


def format_qualifier_lexicon(entries: Iterable[QualifierEntry]) -> str:
    lines = ["# phrase\tweight\tcond_dir\tact_dir\torigin"]
    for e in entries:
        lines.append("\t".join([e.phrase, _fmt(e.weight), e.cond_dir, e.act_dir, e.origin_label]))
    return "\n".join(lines) + "\n"


def save_qualifier_lexicon(entries: Iterable[QualifierEntry], path) -> None:
    atomic_write(path, format_qualifier_lexicon(entries))


def format_term_report(terms: Iterable[WeightedTerm], assigned: Iterable[str] = ()) -> str:
    assigned = set(assigned)
    lines = ["term\tdf\tcorrelation\tgini\tinfogain\tgainratio\taggregate\tdirections"]
    for t in terms:
        lines.append("\t".join([t.term, str(t.df)] + [f"{v:.6f}" for v in
                     (t.w_correlation, t.w_gini, t.w_infogain, t.w_gainratio, t.aggregate)]
                     + ["seed" if t.term in assigned else "unassigned"]))
    return "\n".join(lines) + "\n"


def load_seed_lexicon() -> list[QualifierEntry]:
    return load_qualifier_lexicon(_data_path("seed_qualifiers.tsv"))


__all__ = [
    "BigramCounts", "ExpansionMatrix", "QualifierEntry", "WeightedTerm", "attach_directions", "count_bigrams",
    "expand_qualifiers", "filter_qualifiers", "format_qualifier_lexicon", "format_term_report",
    "load_qualifier_lexicon", "load_seed_lexicon", "minmax_100", "raw_metrics", "save_qualifier_lexicon",
    "score_counts", "score_terms",
]
