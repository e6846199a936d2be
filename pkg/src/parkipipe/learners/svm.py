"""Soft-margin SVM trained by sequential minimal optimisation.

Working-set selection follows the second-order rule of Fan, Chen & Lin
(maximal violating ``i``, then the ``j`` giving the largest objective
decrease). Each sample gets its own box ``C * w_i`` so class weighting enters
as per-sample cost. Probabilities come from a Platt sigmoid fitted on the
training margins.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParams
from .base import Classifier, Standardizer, check_xy, dot_rows, gram, sample_weights_for

log = logging.getLogger(__name__)

TAU = 1e-12


@dataclass(frozen=True)
class SVMConfig:
    kernel: str = "rbf"  # rbf | linear
    C: float = 1.0
    gamma: float | None = None  # None -> 1 / (n_features * var(X))
    tol: float = 1e-3
    max_iter: int = 100_000
    class_weighting: str = "balanced"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kernel not in ("rbf", "linear"):
            raise InvalidParams(f"unknown kernel {self.kernel!r}")
        if not self.C > 0:
            raise InvalidParams("C must be > 0")
        if not self.tol > 0:
            raise InvalidParams("tol must be > 0")
        if self.gamma is not None and not self.gamma > 0:
            raise InvalidParams("gamma must be > 0")


def kernel_matrix(A: np.ndarray, B: np.ndarray, kernel: str, gamma: float) -> np.ndarray:
    if kernel == "linear":
        return gram(A, B)
    sq = dot_rows(A**2, np.ones(A.shape[1]))[:, None] + dot_rows(B**2, np.ones(B.shape[1]))[None, :] - 2.0 * gram(A, B)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def smo_solve(K: np.ndarray, y: np.ndarray, Cvec: np.ndarray, tol: float, max_iter: int):
    """Solve ``min 1/2 a'Qa - e'a`` s.t. ``0 <= a_i <= C_i``, ``y'a = 0``.

    ``y`` holds +1/-1. Returns ``(alpha, b, converged, n_iter)`` where the
    decision function is ``sum_i alpha_i y_i K(x_i, x) + b``.
    """
    n = y.size
    alpha = np.zeros(n)
    G = -np.ones(n)
    diag = np.diag(K).copy()
    pos = y > 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        yG = -y * G
        at_upper = alpha >= Cvec
        at_lower = alpha <= 0
        up = np.where(pos, ~at_upper, ~at_lower)
        low = np.where(pos, ~at_lower, ~at_upper)
        up_scores = np.where(up, yG, -np.inf)
        i = int(np.argmax(up_scores))
        g_max = up_scores[i]
        g_min = np.min(np.where(low, yG, np.inf))
        if g_max - g_min < tol:
            converged = True
            break
        b_diff = g_max - yG
        cand = low & (b_diff > 0)
        a = diag[i] + diag - 2.0 * K[i]
        a = np.where(a > 0, a, TAU)
        obj = np.where(cand, -(b_diff**2) / a, np.inf)
        j = int(np.argmin(obj))

        Ci, Cj = Cvec[i], Cvec[j]
        ai_old, aj_old = alpha[i], alpha[j]
        quad = diag[i] + diag[j] - 2.0 * K[i, j]
        if quad <= 0:
            quad = TAU
        if y[i] != y[j]:
            delta = (-G[i] - G[j]) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > Ci - Cj:
                if ai > Ci:
                    ai, aj = Ci, Ci - diff
            elif aj > Cj:
                aj, ai = Cj, Cj + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > Ci:
                if ai > Ci:
                    ai, aj = Ci, total - Ci
            elif aj < 0:
                aj, ai = 0.0, total
            if total > Cj:
                if aj > Cj:
                    aj, ai = Cj, total - Cj
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        # Q[:, k] = y * y_k * K[:, k]
        G += y * (y[i] * (ai - ai_old) * K[:, i] + y[j] * (aj - aj_old) * K[:, j])
    else:
        log.warning("SMO did not converge in %d iterations", max_iter)

    yG = -y * G
    free = (alpha > 0) & (alpha < Cvec)
    if np.any(free):
        b = float(np.mean(yG[free]))
    else:
        up = np.where(pos, alpha < Cvec, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < Cvec)
        hi = np.max(yG[up]) if np.any(up) else np.min(yG)
        lo = np.min(yG[low]) if np.any(low) else np.max(yG)
        b = float((hi + lo) / 2)
    return alpha, b, converged, it


def fit_platt(f: np.ndarray, y: np.ndarray, weights: np.ndarray | None = None, max_iter: int = 100):
    """Sigmoid ``p = 1 / (1 + exp(A f + B))`` by Newton's method with backtracking.

    Targets use Platt's prior smoothing ``(N+ + 1)/(N+ + 2)`` and
    ``1/(N- + 2)``, which keeps the fit finite on separable training margins.
    """
    w = np.ones_like(f) if weights is None else weights
    n_pos = int(np.sum(y == 1))
    n_neg = y.size - n_pos
    t = np.where(y == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    def loss(A, B):
        z = A * f + B
        # -[t log p + (1-t) log(1-p)] with p = sigmoid(-z)
        return float(np.sum(w * (np.logaddexp(0.0, z) - (1.0 - t) * z)))

    A, B = 0.0, float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
    cur = loss(A, B)
    sigma = 1e-12
    for _ in range(max_iter):
        z = A * f + B
        p = 1.0 / (1.0 + np.exp(np.clip(z, -700, 700)))  # p = P(y=1)
        d1 = w * (t - p)
        d2 = w * p * (1.0 - p)
        gA, gB = float(np.sum(f * d1)), float(np.sum(d1))
        if abs(gA) < 1e-5 and abs(gB) < 1e-5:
            break
        h11 = float(np.sum(f * f * d2)) + sigma
        h22 = float(np.sum(d2)) + sigma
        h21 = float(np.sum(f * d2))
        det = h11 * h22 - h21 * h21
        dA = -(h22 * gA - h21 * gB) / det
        dB = -(-h21 * gA + h11 * gB) / det
        gd = gA * dA + gB * dB
        step = 1.0
        while step >= 1e-10:
            newA, newB = A + step * dA, B + step * dB
            new = loss(newA, newB)
            if new < cur + 1e-4 * step * gd:
                A, B, cur = newA, newB, new
                break
            step /= 2.0
        else:
            break
    return A, B


class SVMClassifier(Classifier):
    kind = "svm"
    config_type = SVMConfig

    def __init__(self, feature_names, scaler, config, support, dual_coef, intercept, gamma, platt, converged=True):
        super().__init__(feature_names, scaler, config, converged)
        self.support = support  # standardised support vectors
        self.dual_coef = dual_coef  # alpha_i * y_i
        self.intercept = intercept
        self.gamma = gamma
        self.platt = platt  # (A, B)

    def _score(self, Z):
        return dot_rows(kernel_matrix(Z, self.support, self.config.kernel, self.gamma), self.dual_coef) + self.intercept

    def _proba_from_score(self, s):
        A, B = self.platt
        return 1.0 / (1.0 + np.exp(np.clip(A * s + B, -700, 700)))

    def _params(self):
        return {
            "support_vectors": self.support.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "intercept": self.intercept,
            "gamma": self.gamma,
            "platt": list(self.platt),
        }

    @classmethod
    def _from_params(cls, p, common):
        n_feat = len(common["feature_names"])
        support = np.array(p["support_vectors"], dtype=float).reshape(-1, n_feat)
        return cls(
            support=support,
            dual_coef=np.array(p["dual_coef"], dtype=float),
            intercept=float(p["intercept"]),
            gamma=float(p["gamma"]),
            platt=tuple(p["platt"]),
            **common,
        )


def fit_svm(X, y, sample_weights=None, config: SVMConfig = SVMConfig(), feature_names=None) -> SVMClassifier:
    X, y, sample_weights = check_xy(X, y, sample_weights)
    weights = sample_weights_for(y, config.class_weighting) if sample_weights is None else sample_weights
    if sample_weights is not None:
        sample_weights_for(y, "none")  # still reject single-class input
    names = feature_names if feature_names is not None else [f"f{i}" for i in range(X.shape[1])]
    scaler = Standardizer.fit(X)
    Z = scaler.transform(X)
    if config.gamma is not None:
        gamma = float(config.gamma)
    else:
        var = float(Z.var())
        gamma = 1.0 / (Z.shape[1] * var) if var > 0 else 1.0
    K = kernel_matrix(Z, Z, config.kernel, gamma)
    ys = np.where(y == 1, 1.0, -1.0)
    alpha, b, converged, _ = smo_solve(K, ys, config.C * weights, config.tol, config.max_iter)
    sv = alpha > 0
    dual = alpha[sv] * ys[sv]
    margins = dot_rows(K[:, sv], dual) + b
    platt = fit_platt(margins, y, weights)
    return SVMClassifier(names, scaler, config, Z[sv].copy(), dual, b, gamma, platt, converged)
