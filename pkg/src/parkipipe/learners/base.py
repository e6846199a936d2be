from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Any, ClassVar, Sequence

import numpy as np

from ..errors import FeatureMismatch, InvalidParams, SchemaError, SingleClass

MODEL_SCHEMA = 1


def class_weights(labels, exact: bool = False) -> tuple:
    """Balanced weights ``(w_pos, w_neg)`` with ``w_c = N / (2 N_c)``.

    ``exact=True`` returns the Fractions the floats are rounded from; with
    them ``w_pos * N_pos == w_neg * N_neg == N / 2`` holds exactly.
    """
    y = np.asarray(labels)
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0 or n_pos + n_neg != y.size:
        raise SingleClass(f"need both classes 0/1, got {n_pos} positive and {n_neg} negative")
    n = y.size
    w_pos, w_neg = Fraction(n, 2 * n_pos), Fraction(n, 2 * n_neg)
    if exact:
        return w_pos, w_neg
    return float(w_pos), float(w_neg)


def sample_weights_for(labels, class_weighting: str) -> np.ndarray:
    y = np.asarray(labels)
    w_pos, w_neg = class_weights(y)
    if class_weighting == "none":
        return np.ones(y.size)
    if class_weighting != "balanced":
        raise InvalidParams(f"unknown class_weighting {class_weighting!r}")
    return np.where(y == 1, w_pos, w_neg)


@dataclass(frozen=True, eq=False)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std > 1e-12 * np.maximum(1.0, np.abs(mean)), std, 1.0)
        return cls(mean, std)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


def dot_rows(A: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``A @ w`` accumulated column by column.

    BLAS picks kernels by buffer alignment, so ``A @ w`` can differ in the
    last bit between two copies of the same rows. Element-wise accumulation
    keeps predictions bit-identical for any input layout.
    """
    out = np.zeros(A.shape[0])
    for j in range(A.shape[1]):
        out += A[:, j] * w[j]
    return out


def gram(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``A @ B.T`` with the same layout independence as :func:`dot_rows`."""
    out = np.zeros((A.shape[0], B.shape[0]))
    for j in range(A.shape[1]):
        out += A[:, j, None] * B[None, :, j]
    return out


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def check_xy(X, y, sample_weights=None):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise InvalidParams(f"X {X.shape} and y {y.shape} are not aligned")
    if not np.all(np.isfinite(X)):
        raise InvalidParams("X contains NaN or Inf")
    if not np.all(np.isin(y, (0, 1))):
        raise InvalidParams("labels must be 0/1")
    y = y.astype(int)
    if sample_weights is not None:
        sample_weights = np.asarray(sample_weights, dtype=float)
        if sample_weights.shape != y.shape or np.any(sample_weights <= 0):
            raise InvalidParams("sample_weights must be positive and aligned with y")
    return X, y, sample_weights


class Classifier:
    """Fitted binary classifier with standardisation state and feature names."""

    kind: ClassVar[str] = ""
    _registry: ClassVar[dict[str, type]] = {}

    def __init_subclass__(cls, **kw):
        super().__init_subclass__(**kw)
        if cls.kind:
            Classifier._registry[cls.kind] = cls

    def __init__(self, feature_names: Sequence[str], scaler: Standardizer, config, converged: bool = True):
        self.feature_names = tuple(feature_names)
        self.scaler = scaler
        self.config = config
        self.converged = converged

    # subclasses implement the score on standardised inputs
    def _score(self, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _proba_from_score(self, s: np.ndarray) -> np.ndarray:
        return sigmoid(s)

    def _align(self, X, names) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if names is not None:
            names = tuple(names)
            if set(names) != set(self.feature_names) or len(names) != len(self.feature_names):
                raise FeatureMismatch("input feature names do not match the fitted names")
            col = {n: i for i, n in enumerate(names)}
            X = X[:, [col[n] for n in self.feature_names]]
        elif X.shape[1] != len(self.feature_names):
            raise FeatureMismatch(f"expected {len(self.feature_names)} columns, got {X.shape[1]}")
        return X

    def decision_function(self, X, names=None) -> np.ndarray:
        return self._score(self.scaler.transform(self._align(X, names)))

    def predict_proba(self, X, names=None) -> np.ndarray:
        return self._proba_from_score(self.decision_function(X, names))

    def predict(self, X, names=None) -> np.ndarray:
        return (self.predict_proba(X, names) >= 0.5).astype(int)

    # --- serialisation ---
    def _params(self) -> dict[str, Any]:
        raise NotImplementedError

    @classmethod
    def _from_params(cls, params: dict[str, Any], common: dict[str, Any]) -> "Classifier":
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        return {
            "model_schema": MODEL_SCHEMA,
            "kind": self.kind,
            "feature_names": list(self.feature_names),
            "config": asdict(self.config),
            "standardization": {"mean": self.scaler.mean.tolist(), "std": self.scaler.std.tolist()},
            "converged": self.converged,
            "params": self._params(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @staticmethod
    def from_dict(doc: dict[str, Any]) -> "Classifier":
        if doc.get("model_schema") != MODEL_SCHEMA:
            raise SchemaError(f"unsupported model_schema {doc.get('model_schema')!r}")
        cls = Classifier._registry.get(doc.get("kind"))
        if cls is None:
            raise SchemaError(f"unknown learner kind {doc.get('kind')!r}")
        common = {
            "feature_names": doc["feature_names"],
            "scaler": Standardizer(
                np.array(doc["standardization"]["mean"], dtype=float),
                np.array(doc["standardization"]["std"], dtype=float),
            ),
            "config": cls.config_type(**doc["config"]),
            "converged": doc.get("converged", True),
        }
        return cls._from_params(doc["params"], common)

    @staticmethod
    def from_json(text: str) -> "Classifier":
        return Classifier.from_dict(json.loads(text))


def predict_proba(clf: Classifier, X, names=None) -> np.ndarray:
    return clf.predict_proba(X, names)
