"""Training loops, data splitting and evaluation for both classifiers."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from ..embeddings import DEFAULT_POSITIONS, FEATURE_MODES, MAX_SEQUENCE_LENGTH, EmbeddingTable, iwv_dim
from ..errors import ConfigError, InsufficientData
from ..textprep import LABELS, SentenceRecord
from .gru import GruModel, NonFiniteLoss
from .metrics import EmptyTestSet, Metrics, compute_metrics
from .naive_bayes import NaiveBayesModel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    train_fraction: float = 0.7
    learning_rate: float = 1e-3
    seed: int = 42
    hidden_dim: int = 64
    shuffle: bool = True
    batch_size: int = 16
    class_weighting: bool = False
    feature_mode: str = "iwv"
    positions: int = DEFAULT_POSITIONS
    max_len: int = MAX_SEQUENCE_LENGTH

    def __post_init__(self):
        if not isinstance(self.epochs, int) or self.epochs < 1:
            raise ConfigError("epochs must be an integer >= 1")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie strictly between 0 and 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.hidden_dim < 1 or self.batch_size < 1 or self.positions < 1 or self.max_len < 1:
            raise ConfigError("hidden_dim, batch_size, positions and max_len must be positive")
        if self.feature_mode not in FEATURE_MODES:
            raise ConfigError(f"feature_mode must be one of {FEATURE_MODES}")

    def to_dict(self) -> dict:
        return asdict(self)


class Adam:
    def __init__(self, params: dict, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params, self.lr, self.b1, self.b2, self.eps = params, lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, grads: dict) -> None:
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            self.params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def _check_labeled(corpus: Sequence[SentenceRecord]) -> None:
    if any(s.label is None for s in corpus):
        raise InsufficientData("every training sentence needs a label")
    if len({s.label for s in corpus}) < 2:
        raise InsufficientData("training needs examples of at least two classes")


def split_corpus(corpus: Sequence[SentenceRecord], train_fraction: float, seed: int):
    """Stratified shuffle split; returns (train, test) preserving no particular order."""
    rng = np.random.default_rng(seed)
    train, test = [], []
    for label in LABELS:
        members = [s for s in corpus if s.label == label]
        order = rng.permutation(len(members))
        cut = int(round(train_fraction * len(members)))
        train.extend(members[i] for i in order[:cut])
        test.extend(members[i] for i in order[cut:])
    if not train or not test:
        raise InsufficientData("corpus too small for a train/test split")
    return train, test


def _pad(feats: Sequence[np.ndarray], dim: int):
    T = max(f.shape[0] for f in feats)
    X = np.zeros((len(feats), T, dim))
    mask = np.zeros((len(feats), T))
    for i, f in enumerate(feats):
        X[i, : f.shape[0]] = f
        mask[i, : f.shape[0]] = 1.0
    return X, mask


def fit_gru(train: Sequence[SentenceRecord], config: TrainConfig, table: EmbeddingTable) -> GruModel:
    _check_labeled(train)
    model = GruModel.init(iwv_dim(table.dim, config.positions, config.feature_mode), config.hidden_dim,
                          seed=config.seed, feature_mode=config.feature_mode, positions=config.positions,
                          max_len=config.max_len, config=config.to_dict())
    rng = np.random.default_rng(config.seed + 1)
    feats = [model.features(s, table) for s in train]
    keep = [i for i, f in enumerate(feats) if f.shape[0] > 0]
    feats = [feats[i] for i in keep]
    y = np.array([LABELS.index(train[i].label) for i in keep])

    weights = None
    if config.class_weighting:
        counts = np.bincount(y, minlength=len(LABELS)).astype(float)
        weights = np.where(counts > 0, len(y) / (len(LABELS) * np.maximum(counts, 1)), 0.0)

    opt = Adam(model.params, config.learning_rate)
    for epoch in range(config.epochs):
        order = rng.permutation(len(feats)) if config.shuffle else np.arange(len(feats))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            X, mask = _pad([feats[i] for i in idx], model.input_dim)
            loss, grads = model.loss_and_grads(X, mask, y[idx], weights)
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"loss became {loss} at epoch {epoch + 1}, batch {start // config.batch_size}; "
                                    "try a lower learning rate")
            opt.step(grads)
            total += loss * len(idx)
        model.history.append(total / len(feats))
        log.info("epoch %d/%d loss %.4f", epoch + 1, config.epochs, model.history[-1])
    return model


def evaluate(model, testset: Sequence[SentenceRecord], table: Optional[EmbeddingTable] = None) -> Metrics:
    if not testset:
        raise EmptyTestSet("no test examples")
    gold = [s.label for s in testset]
    predicted = [model.predict(s, table)[0] for s in testset]
    return compute_metrics(gold, predicted, model.classes)


def train_gru(corpus: Sequence[SentenceRecord], config: TrainConfig, table: EmbeddingTable):
    """Split, fit and score the GRU; returns (model, held-out metrics)."""
    _check_labeled(corpus)
    train, test = split_corpus(corpus, config.train_fraction, config.seed)
    model = fit_gru(train, config, table)
    return model, evaluate(model, [s for s in test if s.tokens], table)


def train_naive_bayes(corpus: Sequence[SentenceRecord], config: TrainConfig):
    _check_labeled(corpus)
    train, test = split_corpus(corpus, config.train_fraction, config.seed)
    model = NaiveBayesModel.fit(train)
    return model, evaluate(model, test)
