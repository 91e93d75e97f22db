"""Four-class sentence classification: IWV + GRU, and a naive Bayes baseline."""
from .gru import EmptySentence, GruModel, NonFiniteLoss, gradient_check, gradient_check_report, softmax
from .metrics import EmptyTestSet, Metrics, aggregate, compute_metrics
from .naive_bayes import NaiveBayesModel
from .training import TrainConfig, evaluate, fit_gru, split_corpus, train_gru, train_naive_bayes


def predict(model, sentence, table=None):
    """(label, scores) for one tokenized sentence."""
    return model.predict(sentence, table)


__all__ = [
    "EmptySentence", "EmptyTestSet", "GruModel", "Metrics", "NaiveBayesModel", "NonFiniteLoss",
    "TrainConfig", "aggregate", "compute_metrics", "evaluate", "fit_gru", "gradient_check",
    "gradient_check_report", "predict", "softmax", "split_corpus", "train_gru", "train_naive_bayes",
]
