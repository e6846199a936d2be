"""L2-regularised, sample-weighted logistic regression.

Fitted by batch gradient descent with an Armijo backtracking line search;
trial steps start from the Barzilai-Borwein estimate. The intercept is not
penalised.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParams
from .base import Classifier, Standardizer, check_xy, dot_rows, sample_weights_for

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LogRegConfig:
    l2_lambda: float = 1.0
    max_iter: int = 20_000
    tol: float = 1e-6
    class_weighting: str = "balanced"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.l2_lambda < 0:
            raise InvalidParams("l2_lambda must be >= 0")
        if not self.tol > 0:
            raise InvalidParams("tol must be > 0")


def logistic_objective(theta: np.ndarray, X: np.ndarray, y: np.ndarray, s: np.ndarray, lam: float):
    """Loss and gradient; ``theta = [intercept, coef...]``.

    loss = sum_i s_i [log(1 + e^z_i) - y_i z_i] + lam/2 ||coef||^2,
    z = intercept + X coef.
    """
    z = theta[0] + dot_rows(X, theta[1:])
    loss = float(np.sum(s * (np.logaddexp(0.0, z) - y * z)) + 0.5 * lam * np.sum(theta[1:] * theta[1:]))
    r = s * (0.5 * (1.0 + np.tanh(0.5 * z)) - y)  # s * (sigmoid(z) - y)
    grad = np.empty_like(theta)
    grad[0] = r.sum()
    grad[1:] = (X * r[:, None]).sum(axis=0) + lam * theta[1:]
    return loss, grad


class LogRegClassifier(Classifier):
    kind = "logreg"
    config_type = LogRegConfig

    def __init__(self, feature_names, scaler, config, coef, intercept, n_iter=0, loss_trace=(), converged=True):
        super().__init__(feature_names, scaler, config, converged)
        self.coef = coef
        self.intercept = intercept
        self.n_iter = n_iter
        self.loss_trace = list(loss_trace)

    def _score(self, Z):
        return dot_rows(Z, self.coef) + self.intercept

    def _params(self):
        return {"coef": self.coef.tolist(), "intercept": self.intercept, "n_iter": self.n_iter}

    @classmethod
    def _from_params(cls, p, common):
        return cls(coef=np.array(p["coef"], dtype=float), intercept=float(p["intercept"]), n_iter=p.get("n_iter", 0), **common)


def fit_logreg(X, y, sample_weights=None, config: LogRegConfig = LogRegConfig(), feature_names=None) -> LogRegClassifier:
    X, y, sample_weights = check_xy(X, y, sample_weights)
    s = sample_weights_for(y, config.class_weighting) if sample_weights is None else sample_weights
    if sample_weights is not None:
        sample_weights_for(y, "none")
    names = feature_names if feature_names is not None else [f"f{i}" for i in range(X.shape[1])]
    scaler = Standardizer.fit(X)
    Z = scaler.transform(X)
    yf = y.astype(float)

    theta = np.zeros(Z.shape[1] + 1)
    loss, grad = logistic_objective(theta, Z, yf, s, config.l2_lambda)
    trace = [loss]
    # Lipschitz bound of the gradient gives a safe first step
    step = 1.0 / (0.25 * s.sum() * (1.0 + np.sum(Z**2) / max(len(y), 1)) + config.l2_lambda)
    converged = False
    it = 0
    for it in range(1, config.max_iter + 1):
        if np.max(np.abs(grad)) <= config.tol:
            converged = True
            break
        gnorm2 = float(np.sum(grad * grad))
        t = step
        while True:
            cand = theta - t * grad
            new_loss, new_grad = logistic_objective(cand, Z, yf, s, config.l2_lambda)
            if new_loss <= loss - 1e-4 * t * gnorm2:
                break
            t *= 0.5
            if t < 1e-20:
                break
        if new_loss > loss:
            break  # no descent possible at machine precision
        dtheta, dgrad = cand - theta, new_grad - grad
        denom = float(np.sum(dtheta * dgrad))
        step = float(np.sum(dtheta * dtheta)) / denom if denom > 0 else 2.0 * t
        theta, loss, grad = cand, new_loss, new_grad
        trace.append(loss)
    else:
        converged = np.max(np.abs(grad)) <= config.tol
    if not converged:
        log.warning("logistic regression stopped at |grad|_inf=%.3g after %d iterations", np.max(np.abs(grad)), it)
    return LogRegClassifier(names, scaler, config, theta[1:].copy(), float(theta[0]), it, trace, bool(converged))
