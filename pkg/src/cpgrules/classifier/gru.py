"""Single-layer GRU sentence classifier with hand-written backpropagation.

Per step, for input x and previous state h::

    z  = sigmoid(x Wz + h Uz + bz)
    r  = sigmoid(x Wr + h Ur + br)
    c  = tanh(x Wh + (r * h) Uh + bh)
    h' = (1 - z) * h + z * c

The last hidden state feeds one dense layer (``Wo``: hidden x classes) and a
softmax.  Batches are right-padded; padded steps carry the state through
unchanged.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..embeddings import DEFAULT_POSITIONS, MAX_SEQUENCE_LENGTH, EmbeddingTable, sentence_features
from ..errors import CpgRulesError, DataError
from ..files import atomic_write
from ..textprep import LABELS, SentenceRecord

FORMAT_VERSION = 1
PARAM_NAMES = ("Wz", "Uz", "bz", "Wr", "Ur", "br", "Wh", "Uh", "bh", "Wo", "bo")


class EmptySentence(CpgRulesError):
    pass


class NonFiniteLoss(CpgRulesError):
    pass


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class GruModel:
    input_dim: int
    hidden_dim: int
    params: dict[str, np.ndarray]
    classes: tuple[str, ...] = LABELS
    feature_mode: str = "iwv"
    positions: int = DEFAULT_POSITIONS
    max_len: int = MAX_SEQUENCE_LENGTH
    config: dict = field(default_factory=dict)
    history: list[float] = field(default_factory=list)

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, seed: int = 0, classes=LABELS, **kwargs) -> "GruModel":
        rng = np.random.default_rng(seed)
        k = len(classes)

        def uniform(fan_in, shape):
            bound = math.sqrt(1.0 / fan_in)
            return rng.uniform(-bound, bound, size=shape)

        params = {}
        for gate in "zrh":
            params["W" + gate] = uniform(input_dim, (input_dim, hidden_dim))
            params["U" + gate] = uniform(hidden_dim, (hidden_dim, hidden_dim))
            params["b" + gate] = np.zeros(hidden_dim)
        params["Wo"] = uniform(hidden_dim, (hidden_dim, k))
        params["bo"] = np.zeros(k)
        return cls(input_dim, hidden_dim, params, tuple(classes), **kwargs)

    # ------------------------------------------------------------ forward

    def _forward(self, X, mask):
        p = self.params
        B, T, _ = X.shape
        h = np.zeros((B, self.hidden_dim))
        cache = []
        for t in range(T):
            x = X[:, t, :]
            m = mask[:, t:t + 1]
            z = sigmoid(x @ p["Wz"] + h @ p["Uz"] + p["bz"])
            r = sigmoid(x @ p["Wr"] + h @ p["Ur"] + p["br"])
            c = np.tanh(x @ p["Wh"] + (r * h) @ p["Uh"] + p["bh"])
            h_next = (1.0 - z) * h + z * c
            cache.append((x, m, h, z, r, c))
            h = m * h_next + (1.0 - m) * h
        logits = h @ p["Wo"] + p["bo"]
        return h, logits, cache

    def hidden_states(self, X) -> np.ndarray:
        """All hidden states (T, hidden) for one unpadded sequence."""
        X = np.asarray(X, dtype=np.float64)[None]
        h_last, _, cache = self._forward(X, np.ones(X.shape[:2]))
        states = [step[2] for step in cache[1:]] + [h_last]
        return np.concatenate(states, axis=0)

    def proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise EmptySentence("cannot classify a sentence with no tokens")
        _, logits, _ = self._forward(X[None], np.ones((1, X.shape[0])))
        return softmax(logits)[0]

    # ------------------------------------------------------------ backward

    def loss_and_grads(self, X, mask, y, weights=None):
        """Mean (optionally class-weighted) cross-entropy and its parameter gradients.

        ``X`` is (B, T, input_dim), ``mask`` (B, T) with 1 for real steps,
        ``y`` (B,) integer class indices.
        """
        p = self.params
        X = np.asarray(X, dtype=np.float64)
        mask = np.asarray(mask, dtype=np.float64)
        y = np.asarray(y)
        B = X.shape[0]
        w = np.ones(B) if weights is None else np.asarray(weights, dtype=np.float64)[y]

        h_last, logits, cache = self._forward(X, mask)
        probs = softmax(logits)
        picked = probs[np.arange(B), y]
        with np.errstate(divide="ignore"):
            loss = float(np.sum(-w * np.log(picked)) / B)

        grads = {name: np.zeros_like(v) for name, v in p.items()}
        dlogits = probs.copy()
        dlogits[np.arange(B), y] -= 1.0
        dlogits *= w[:, None] / B
        grads["Wo"] = h_last.T @ dlogits
        grads["bo"] = dlogits.sum(axis=0)
        dh = dlogits @ p["Wo"].T

        for x, m, h_prev, z, r, c in reversed(cache):
            d_next = m * dh
            dh_prev = (1.0 - m) * dh + d_next * (1.0 - z)
            dc = d_next * z
            dz = d_next * (c - h_prev)

            dah = dc * (1.0 - c * c)
            grads["Wh"] += x.T @ dah
            grads["Uh"] += (r * h_prev).T @ dah
            grads["bh"] += dah.sum(axis=0)
            drh = dah @ p["Uh"].T
            dh_prev += drh * r
            dr = drh * h_prev

            daz = dz * z * (1.0 - z)
            dar = dr * r * (1.0 - r)
            grads["Wz"] += x.T @ daz
            grads["Uz"] += h_prev.T @ daz
            grads["bz"] += daz.sum(axis=0)
            grads["Wr"] += x.T @ dar
            grads["Ur"] += h_prev.T @ dar
            grads["br"] += dar.sum(axis=0)
            dh_prev += daz @ p["Uz"].T + dar @ p["Ur"].T
            dh = dh_prev
        return loss, grads

    # ------------------------------------------------------------ inference

    def features(self, sentence: SentenceRecord, table: EmbeddingTable) -> np.ndarray:
        return sentence_features(sentence, table, self.positions, self.feature_mode, self.max_len)

    def predict(self, sentence: SentenceRecord, table: EmbeddingTable) -> tuple[str, np.ndarray]:
        if not sentence.tokens:
            raise EmptySentence(f"sentence {sentence.doc_id}#{sentence.sent_index} has no tokens")
        scores = self.proba(self.features(sentence, table))
        return self.classes[int(np.argmax(scores))], scores

    # ------------------------------------------------------------ persistence

    def to_dict(self) -> dict:
        return {
            "format": "cpgrules-gru",
            "version": FORMAT_VERSION,
            "input_dim": self.input_dim,
            "hidden_dim": self.hidden_dim,
            "classes": list(self.classes),
            "feature_mode": self.feature_mode,
            "positions": self.positions,
            "max_len": self.max_len,
            "config": self.config,
            "history": self.history,
            "params": {k: {"shape": list(self.params[k].shape), "data": self.params[k].ravel().tolist()}
                       for k in PARAM_NAMES},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GruModel":
        if d.get("format") != "cpgrules-gru" or d.get("version") != FORMAT_VERSION:
            raise DataError("not a cpgrules GRU model file (format/version mismatch)")
        params = {k: np.array(v["data"], dtype=np.float64).reshape(v["shape"]) for k, v in d["params"].items()}
        if set(params) != set(PARAM_NAMES):
            raise DataError("model file is missing parameter tensors")
        model = cls(d["input_dim"], d["hidden_dim"], params, tuple(d["classes"]), d["feature_mode"],
                    d["positions"], d["max_len"], d.get("config", {}), d.get("history", []))
        model.check_shapes()
        return model

    def check_shapes(self) -> None:
        i, h, k = self.input_dim, self.hidden_dim, len(self.classes)
        expected = {"Wo": (h, k), "bo": (k,)}
        for g in "zrh":
            expected.update({"W" + g: (i, h), "U" + g: (h, h), "b" + g: (h,)})
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise DataError(f"parameter {name} has shape {self.params[name].shape}, expected {shape}")
            if not np.all(np.isfinite(self.params[name])):
                raise DataError(f"parameter {name} has non-finite values")

    def save(self, path) -> None:
        atomic_write(path, json.dumps(self.to_dict(), separators=(",", ":")) + "\n")

    @classmethod
    def load(cls, path) -> "GruModel":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DataError(f"model file is not valid JSON ({exc.msg})", path) from None
        return cls.from_dict(d)


def gradient_check(model: GruModel, example, epsilon: float = 1e-5) -> float:
    """Max over parameter tensors of ||analytic - numeric|| / (||analytic|| + ||numeric||).

    ``example`` is ``(features, label)`` where features is (T, input_dim) and
    label a class name or index.  Tensors whose analytic and numeric gradients
    are both exactly zero contribute 0.
    """
    return max(gradient_check_report(model, example, epsilon).values())


def gradient_check_report(model: GruModel, example, epsilon: float = 1e-5) -> dict[str, float]:
    if not (1e-6 <= epsilon <= 1e-3):
        raise ValueError("epsilon must lie in [1e-6, 1e-3]")
    X, label = example
    X = np.asarray(X, dtype=np.float64)[None]
    y = np.array([label if isinstance(label, (int, np.integer)) else model.classes.index(label)])
    mask = np.ones(X.shape[:2])
    _, analytic = model.loss_and_grads(X, mask, y)

    report = {}
    for name in PARAM_NAMES:
        param = model.params[name]
        numeric = np.zeros_like(param)
        flat, nflat = param.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            plus, _ = model.loss_and_grads(X, mask, y)
            flat[i] = orig - epsilon
            minus, _ = model.loss_and_grads(X, mask, y)
            flat[i] = orig
            nflat[i] = (plus - minus) / (2.0 * epsilon)
        a = analytic[name]
        denom = np.linalg.norm(a) + np.linalg.norm(numeric)
        report[name] = 0.0 if denom == 0 else float(np.linalg.norm(a - numeric) / denom)
    return report
