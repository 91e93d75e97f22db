from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Sequence

from ..errors import CpgRulesError
from ..textprep import LABELS


class EmptyTestSet(CpgRulesError):
    pass


@dataclass
class Metrics:
    accuracy: float
    confusion: list[list[int]]          # confusion[true][predicted]
    labels: tuple[str, ...] = LABELS
    precision: dict[str, float] = field(default_factory=dict)
    recall: dict[str, float] = field(default_factory=dict)
    support: dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(map(sum, self.confusion))

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "labels": list(self.labels),
            "confusion": self.confusion,
            "precision": self.precision,
            "recall": self.recall,
            "support": self.support,
            "total": self.total,
        }


def compute_metrics(gold: Sequence[str], predicted: Sequence[str], labels: Sequence[str] = LABELS) -> Metrics:
    if len(gold) != len(predicted):
        raise ValueError("gold and predicted differ in length")
    if not gold:
        raise EmptyTestSet("no test examples")
    index = {lab: i for i, lab in enumerate(labels)}
    k = len(labels)
    confusion = [[0] * k for _ in range(k)]
    for g, p in zip(gold, predicted):
        confusion[index[g]][index[p]] += 1
    correct = sum(confusion[i][i] for i in range(k))
    precision, recall, support = {}, {}, {}
    for i, lab in enumerate(labels):
        row = sum(confusion[i])
        col = sum(confusion[j][i] for j in range(k))
        support[lab] = row
        recall[lab] = confusion[i][i] / row if row else 0.0
        precision[lab] = confusion[i][i] / col if col else 0.0
    return Metrics(correct / len(gold), confusion, tuple(labels), precision, recall, support)


def aggregate(runs: Sequence[Metrics]) -> dict:
    """Mean and population std of accuracy over several seeded runs."""
    accs = [m.accuracy for m in runs]
    return {
        "runs": len(accs),
        "accuracy_mean": statistics.fmean(accs),
        "accuracy_std": statistics.pstdev(accs) if len(accs) > 1 else 0.0,
        "accuracies": accs,
    }
