"""Multinomial naive Bayes over unigram counts with add-one smoothing."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import InsufficientData
from ..textprep import LABELS, SentenceRecord


def unigrams(sentence: SentenceRecord) -> list[str]:
    return [t.normalized for t in sentence.tokens if not t.is_punct]


@dataclass
class NaiveBayesModel:
    classes: tuple[str, ...] = LABELS
    class_counts: dict[str, int] = field(default_factory=dict)
    word_counts: dict[str, Counter] = field(default_factory=dict)
    vocabulary: frozenset = frozenset()

    @classmethod
    def fit(cls, sentences: Sequence[SentenceRecord], classes=LABELS) -> "NaiveBayesModel":
        labels = {s.label for s in sentences}
        if len(labels) < 2:
            raise InsufficientData("naive Bayes needs examples of at least two classes")
        class_counts = {c: 0 for c in classes}
        word_counts = {c: Counter() for c in classes}
        vocab = set()
        for s in sentences:
            class_counts[s.label] += 1
            words = unigrams(s)
            word_counts[s.label].update(words)
            vocab.update(words)
        return cls(tuple(classes), class_counts, word_counts, frozenset(vocab))

    def log_joint(self, words: Sequence[str]) -> np.ndarray:
        """log P(c) + sum_w log P(w | c); classes never seen in training get -inf."""
        n = sum(self.class_counts.values())
        v = len(self.vocabulary)
        out = np.full(len(self.classes), -np.inf)
        for i, c in enumerate(self.classes):
            if self.class_counts[c] == 0:
                continue
            counts = self.word_counts[c]
            total = sum(counts.values())
            score = math.log(self.class_counts[c] / n)
            for w in words:
                score += math.log((counts[w] + 1) / (total + v))
            out[i] = score
        return out

    def proba(self, words: Sequence[str]) -> np.ndarray:
        lj = self.log_joint(words)
        lj = lj - lj.max()
        p = np.exp(lj)
        return p / p.sum()

    def predict(self, sentence: SentenceRecord, table=None) -> tuple[str, np.ndarray]:
        scores = self.proba(unigrams(sentence))
        return self.classes[int(np.argmax(scores))], scores
