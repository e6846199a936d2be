"""Base learners (SVM, gradient-boosted trees) and the logistic meta-model."""

from .base import Classifier, Standardizer, class_weights, predict_proba, sample_weights_for, sigmoid
from .gbdt import GBDTClassifier, GBDTConfig, fit_gbdt
from .logreg import LogRegClassifier, LogRegConfig, fit_logreg, logistic_objective
from .svm import SVMClassifier, SVMConfig, fit_svm

LEARNER_KINDS = ("gbdt", "svm_rbf", "svm_linear", "logreg")


def default_config(kind: str, seed: int = 0):
    if kind == "gbdt":
        return GBDTConfig(seed=seed)
    if kind == "svm_rbf":
        return SVMConfig(kernel="rbf", seed=seed)
    if kind == "svm_linear":
        return SVMConfig(kernel="linear", seed=seed)
    if kind == "logreg":
        return LogRegConfig(seed=seed)
    raise ValueError(f"unknown learner kind {kind!r}")


def fit(kind: str, X, y, sample_weights=None, config=None, feature_names=None) -> Classifier:
    """Dispatch on learner kind (``gbdt``, ``svm_rbf``, ``svm_linear``, ``logreg``)."""
    config = config if config is not None else default_config(kind)
    if kind == "gbdt":
        return fit_gbdt(X, y, sample_weights, config, feature_names)
    if kind in ("svm_rbf", "svm_linear"):
        return fit_svm(X, y, sample_weights, config, feature_names)
    if kind == "logreg":
        return fit_logreg(X, y, sample_weights, config, feature_names)
    raise ValueError(f"unknown learner kind {kind!r}")


__all__ = [
    "Classifier",
    "GBDTClassifier",
    "GBDTConfig",
    "LEARNER_KINDS",
    "LogRegClassifier",
    "LogRegConfig",
    "SVMClassifier",
    "SVMConfig",
    "Standardizer",
    "class_weights",
    "default_config",
    "fit",
    "fit_gbdt",
    "fit_logreg",
    "fit_svm",
    "logistic_objective",
    "predict_proba",
    "sample_weights_for",
    "sigmoid",
]
