"""Word vectors: word2vec text loader, cosine similarity, neighbors and IWV features.

An IWV (improved word vector) for a token is the concatenation

    [ word vector (dim) | POS one-hot (len(TAGSET)) | relative-position one-hot (P) ]

with the word segment zeroed for out-of-vocabulary tokens.
"""
from __future__ import annotations

import gzip
import math
import warnings
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import CpgRulesError, DataError
from .textprep import TAGSET, SentenceRecord, Token

DEFAULT_POSITIONS = 10
MAX_SEQUENCE_LENGTH = 64
FEATURE_MODES = ("iwv", "word")

_TAG_INDEX = {t: i for i, t in enumerate(TAGSET)}


class MalformedHeader(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class ZeroVector(CpgRulesError, ValueError):
    pass


class TermNotFound(CpgRulesError, KeyError):
    pass


class EmbeddingTable:
    """Immutable term -> vector map of fixed dimensionality."""

    def __init__(self, terms: Sequence[str], vectors):
        vectors = np.array(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(terms):
            raise ValueError("vectors must be a (len(terms), dim) array")
        if vectors.shape[1] < 1:
            raise ValueError("dim must be positive")
        self.terms = tuple(t.lower() for t in terms)
        self._index = {t: i for i, t in enumerate(self.terms)}
        if len(self._index) != len(self.terms):
            raise ValueError("duplicate terms")
        vectors.setflags(write=False)
        self.matrix = vectors
        norms = np.linalg.norm(vectors, axis=1)
        norms.setflags(write=False)
        self.norms = norms

    @classmethod
    def from_dict(cls, mapping: Mapping[str, Iterable[float]]) -> "EmbeddingTable":
        terms = list(mapping)
        return cls(terms, [list(mapping[t]) for t in terms])

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term) -> bool:
        return term.lower() in self._index

    def __getitem__(self, term: str) -> np.ndarray:
        try:
            return self.matrix[self._index[term.lower()]]
        except KeyError:
            raise TermNotFound(term) from None

    def get(self, term: str) -> Optional[np.ndarray]:
        i = self._index.get(term.lower())
        return None if i is None else self.matrix[i]

    def phrase_vector(self, phrase: str) -> Optional[np.ndarray]:
        """Vector for a possibly multi-word phrase.

        A stored entry for the whole phrase (space or underscore joined) wins;
        otherwise the mean of the in-vocabulary word vectors, or None when no
        word is known.
        """
        phrase = phrase.lower().strip()
        for key in (phrase, phrase.replace(" ", "_")):
            if key in self._index:
                return self.matrix[self._index[key]]
        rows = [self._index[w] for w in phrase.split() if w in self._index]
        if not rows:
            return None
        return self.matrix[rows].mean(axis=0)

    def similarities(self, vector) -> np.ndarray:
        """Cosine of ``vector`` against every row; rows with zero norm score 0."""
        v = np.asarray(vector, dtype=np.float64)
        vn = np.linalg.norm(v)
        if vn == 0:
            raise ZeroVector("query vector has zero norm")
        dots = self.matrix @ v
        with np.errstate(divide="ignore", invalid="ignore"):
            sims = np.where(self.norms > 0, dots / (self.norms * vn), 0.0)
        return np.clip(sims, -1.0, 1.0)


def load_embeddings(path) -> EmbeddingTable:
    """Read word2vec text format (optionally gzip-compressed when ``path`` ends in .gz)."""
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2 or not all(h.isdigit() for h in header) or int(header[1]) < 1:
            raise MalformedHeader('expected header "count dim"', path, 1)
        count, dim = int(header[0]), int(header[1])
        rows: dict[str, list[float]] = {}
        for line_no, line in enumerate(fh, 2):
            parts = line.rstrip().split(" ")
            if not parts or parts == [""]:
                continue
            term, values = parts[0].lower(), parts[1:]
            if len(values) != dim:
                raise DimensionMismatch(f"row has {len(values)} values, expected {dim}", path, line_no)
            try:
                vec = [float(x) for x in values]
            except ValueError:
                raise DataError("non-numeric vector component", path, line_no) from None
            if term in rows:
                warnings.warn(f"{path}:{line_no}: duplicate term {term!r}, keeping the last row", stacklevel=2)
                del rows[term]
            rows[term] = vec
    if len(rows) != count:
        warnings.warn(f"{path}: header says {count} rows, read {len(rows)} distinct terms", stacklevel=2)
    if not rows:
        return EmbeddingTable([], np.zeros((0, dim)))
    return EmbeddingTable(list(rows), list(rows.values()))


def save_embeddings(table: EmbeddingTable, path) -> None:
    lines = [f"{len(table)} {table.dim}"]
    for term, vec in zip(table.terms, table.matrix):
        lines.append(term + " " + " ".join(repr(float(x)) for x in vec))
    data = "\n".join(lines) + "\n"
    if str(path).endswith(".gz"):
        with gzip.open(path, "wt", encoding="utf-8") as fh:
            fh.write(data)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(data)


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    nu, nv = math.sqrt(float(u @ u)), math.sqrt(float(v @ v))
    if nu == 0 or nv == 0:
        raise ZeroVector("cosine is undefined for a zero vector")
    return max(-1.0, min(1.0, float(u @ v) / (nu * nv)))


def nearest_neighbors(term: str, k: int, table: EmbeddingTable) -> list[tuple[str, float]]:
    """Top-``k`` most similar other terms, ties broken lexicographically."""
    if term not in table:
        raise TermNotFound(term)
    if k <= 0:
        return []
    sims = table.similarities(table[term])
    q = table._index[term.lower()]
    ranked = sorted(((-float(s), t) for i, (t, s) in enumerate(zip(table.terms, sims)) if i != q))
    return [(t, -s) for s, t in ranked[:k]]


def position_bucket(index: int, sentence_len: int, positions: int = DEFAULT_POSITIONS) -> int:
    return min(positions - 1, (positions * index) // sentence_len)


def iwv_dim(table_dim: int, positions: int = DEFAULT_POSITIONS, mode: str = "iwv") -> int:
    return table_dim if mode == "word" else table_dim + len(TAGSET) + positions


def compose_iwv(token: Token, sentence_len: int, table: EmbeddingTable,
                positions: int = DEFAULT_POSITIONS, mode: str = "iwv") -> np.ndarray:
    if sentence_len < 1:
        raise ValueError("sentence_len must be >= 1")
    if mode not in FEATURE_MODES:
        raise ValueError(f"unknown feature mode {mode!r}")
    word = table.get(token.normalized)
    vec = np.zeros(iwv_dim(table.dim, positions, mode))
    if word is not None:
        vec[: table.dim] = word
    if mode == "iwv":
        tag = token.pos if token.pos in _TAG_INDEX else "NOUN"
        vec[table.dim + _TAG_INDEX[tag]] = 1.0
        vec[table.dim + len(TAGSET) + position_bucket(token.index, sentence_len, positions)] = 1.0
    return vec


def sentence_features(sentence: SentenceRecord, table: EmbeddingTable, positions: int = DEFAULT_POSITIONS,
                      mode: str = "iwv", max_len: int = MAX_SEQUENCE_LENGTH) -> np.ndarray:
    """(T, d) feature matrix for a sentence, truncated to ``max_len`` tokens."""
    tokens = sentence.tokens[:max_len]
    n = len(sentence.tokens)
    if not tokens:
        return np.zeros((0, iwv_dim(table.dim, positions, mode)))
    return np.stack([compose_iwv(t, n, table, positions, mode) for t in tokens])
