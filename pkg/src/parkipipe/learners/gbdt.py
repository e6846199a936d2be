"""Gradient-boosted regression trees on the logistic loss.

Each stage fits a depth-limited tree to the weighted negative gradient with
greedy variance-reduction splits; leaves take a Newton step. Candidate
thresholds are midpoints between consecutive distinct training values (thinned
to ``max_bins`` quantiles for wide columns), so split search runs on
histograms. Ties go to the lowest feature index, then the lowest threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParams
from .base import Classifier, Standardizer, check_xy, sample_weights_for, sigmoid

MIN_GAIN = 1e-12
MIN_HESSIAN = 1e-12


@dataclass(frozen=True)
class GBDTConfig:
    n_trees: int = 200
    max_depth: int = 3
    learning_rate: float = 0.1
    min_leaf: int = 1
    max_bins: int = 255
    class_weighting: str = "balanced"
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.learning_rate <= 1:
            raise InvalidParams("learning_rate must be in (0, 1]")
        if self.max_depth < 1:
            raise InvalidParams("max_depth must be >= 1")
        if self.n_trees < 1 or self.min_leaf < 1 or self.max_bins < 2:
            raise InvalidParams("n_trees, min_leaf >= 1 and max_bins >= 2 required")


def _thresholds(col: np.ndarray, max_bins: int) -> np.ndarray:
    u = np.unique(col)
    mids = (u[:-1] + u[1:]) / 2.0
    if mids.size > max_bins - 1:
        pick = np.unique(np.round(np.linspace(0, mids.size - 1, max_bins - 1)).astype(int))
        mids = mids[pick]
    return mids


@dataclass
class Tree:
    feature: np.ndarray  # -1 for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, Z: np.ndarray) -> np.ndarray:
        node = np.zeros(Z.shape[0], dtype=int)
        rows = np.arange(Z.shape[0])
        while True:
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                return node
            go_left = Z[rows, np.where(inner, feat, 0)] <= self.threshold[node]
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)

    def predict(self, Z: np.ndarray) -> np.ndarray:
        return self.value[self.apply(Z)]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("feature", "threshold", "left", "right", "value")}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.array(d["feature"], dtype=int),
            np.array(d["threshold"], dtype=float),
            np.array(d["left"], dtype=int),
            np.array(d["right"], dtype=int),
            np.array(d["value"], dtype=float),
        )


class _TreeBuilder:
    """Grows one tree level by level; all nodes of a level share one histogram pass."""

    def __init__(self, codes: np.ndarray, thresholds: list[np.ndarray], config: GBDTConfig):
        self.codes = codes
        self.thresholds = thresholds
        self.config = config
        n_bins = np.array([t.size + 1 for t in thresholds])
        offsets = np.concatenate([[0], np.cumsum(n_bins)[:-1]])
        self.total_bins = int(n_bins.sum())
        self.flat_codes = codes + offsets[None, :]
        self.slot_feature = np.repeat(np.arange(codes.shape[1]), n_bins)
        self.slot_bin = np.arange(self.total_bins) - offsets[self.slot_feature]
        # the last bin of a feature leaves nothing on the right
        self.slot_valid = self.slot_bin < n_bins[self.slot_feature] - 1
        self.feat_last = np.cumsum(n_bins) - 1

    def _feature_cumsum(self, H: np.ndarray) -> np.ndarray:
        c = np.cumsum(H, axis=1)
        base = np.concatenate([np.zeros((H.shape[0], 1)), c[:, self.feat_last[:-1]]], axis=1)
        return c - base[:, self.slot_feature]

    def _best_splits(self, samples, local, m, wr, w):
        """Best (feature, bin) for each of ``m`` nodes, or -1 where no split helps."""
        d = self.codes.shape[1]
        T = self.total_bins
        flat = (local[:, None] * T + self.flat_codes[samples]).ravel()
        size = m * T
        H_wr = np.bincount(flat, np.repeat(wr[samples], d), size).reshape(m, T)
        H_w = np.bincount(flat, np.repeat(w[samples], d), size).reshape(m, T)
        H_n = np.bincount(flat, minlength=size).reshape(m, T).astype(float)
        s_wr = np.bincount(local, wr[samples], m)[:, None]
        s_w = np.bincount(local, w[samples], m)[:, None]
        s_n = np.bincount(local, minlength=m)[:, None]
        l_wr, l_w, l_n = self._feature_cumsum(H_wr), self._feature_cumsum(H_w), self._feature_cumsum(H_n)
        r_wr, r_w, r_n = s_wr - l_wr, s_w - l_w, s_n - l_n
        ok = self.slot_valid[None, :] & (l_n >= self.config.min_leaf) & (r_n >= self.config.min_leaf)
        ok &= (l_w > 0) & (r_w > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = l_wr**2 / l_w + r_wr**2 / r_w - s_wr**2 / s_w
        gain = np.where(ok, gain, -np.inf)
        k = np.argmax(gain, axis=1)
        best = gain[np.arange(m), k]
        good = best > MIN_GAIN * np.maximum(1.0, s_w[:, 0])
        return np.where(good, self.slot_feature[k], -1), self.slot_bin[k]

    def build(self, wr, w, grad_w, hess_w):
        cfg = self.config
        n = w.size
        feature, threshold, left, right = [-1], [0.0], [-1], [-1]
        node_of = np.zeros(n, dtype=int)  # current node of every sample
        frontier = [0]
        for _depth in range(cfg.max_depth):
            if not frontier:
                break
            slot = {node: i for i, node in enumerate(frontier)}
            lookup = np.full(len(feature), -1)
            lookup[frontier] = np.arange(len(frontier))
            local_all = lookup[node_of]
            samples = np.flatnonzero(local_all >= 0)
            local = local_all[samples]
            counts = np.bincount(local, minlength=len(frontier))
            feats, bins = self._best_splits(samples, local, len(frontier), wr, w)
            next_frontier = []
            for node in frontier:
                i = slot[node]
                if feats[i] < 0 or counts[i] < 2 * cfg.min_leaf:
                    continue
                f, b = int(feats[i]), int(bins[i])
                feature[node] = f
                threshold[node] = float(self.thresholds[f][b])
                for arr in (feature, threshold, left, right):
                    arr.extend([-1 if arr is not threshold else 0.0] * 2)
                l_node, r_node = len(feature) - 2, len(feature) - 1
                left[node], right[node] = l_node, r_node
                members = samples[local == i]
                goes_left = self.codes[members, f] <= b
                node_of[members[goes_left]] = l_node
                node_of[members[~goes_left]] = r_node
                next_frontier += [l_node, r_node]
            frontier = next_frontier
        n_nodes = len(feature)
        G = np.bincount(node_of, grad_w, n_nodes)
        Hs = np.bincount(node_of, hess_w, n_nodes)
        value = np.where(np.array(feature) < 0, G / np.maximum(Hs, MIN_HESSIAN), 0.0)
        tree = Tree(np.array(feature), np.array(threshold), np.array(left), np.array(right), value)
        return tree, node_of


def _logloss(y, F, w) -> float:
    return float(np.sum(w * (np.logaddexp(0.0, F) - y * F)))


class GBDTClassifier(Classifier):
    kind = "gbdt"
    config_type = GBDTConfig

    def __init__(self, feature_names, scaler, config, base_score, trees, train_loss=(), converged=True):
        super().__init__(feature_names, scaler, config, converged)
        self.base_score = base_score
        self.trees = list(trees)
        self.train_loss = list(train_loss)

    def _score(self, Z):
        F = np.full(Z.shape[0], self.base_score)
        for tree in self.trees:
            F = F + tree.predict(Z)
        return F

    def _params(self):
        return {
            "base_score": self.base_score,
            "trees": [t.to_dict() for t in self.trees],
            "train_loss": self.train_loss,
        }

    @classmethod
    def _from_params(cls, p, common):
        return cls(
            base_score=float(p["base_score"]),
            trees=[Tree.from_dict(t) for t in p["trees"]],
            train_loss=p.get("train_loss", []),
            **common,
        )


def fit_gbdt(X, y, sample_weights=None, config: GBDTConfig = GBDTConfig(), feature_names=None) -> GBDTClassifier:
    X, y, sample_weights = check_xy(X, y, sample_weights)
    w = sample_weights_for(y, config.class_weighting) if sample_weights is None else sample_weights
    if sample_weights is not None:
        sample_weights_for(y, "none")
    names = feature_names if feature_names is not None else [f"f{i}" for i in range(X.shape[1])]
    scaler = Standardizer.fit(X)
    Z = scaler.transform(X)
    thresholds = [_thresholds(Z[:, j], config.max_bins) for j in range(Z.shape[1])]
    codes = np.stack(
        [np.searchsorted(t, Z[:, j], side="left") for j, t in enumerate(thresholds)], axis=1
    ).astype(np.int64)
    builder = _TreeBuilder(codes, thresholds, config)

    pos_mass = float(np.sum(w[y == 1]))
    base = float(np.log(pos_mass / (w.sum() - pos_mass)))
    F = np.full(y.size, base)
    loss = _logloss(y, F, w)
    losses = [loss]
    trees = []
    for _ in range(config.n_trees):
        p = sigmoid(F)
        resid = y - p  # negative gradient
        tree, leaf_of = builder.build(w * resid, w, w * resid, w * p * (1.0 - p))
        if tree.feature[0] < 0:
            break  # nothing left to split; further stages would be no-ops
        tree.value *= config.learning_rate
        step = tree.value[leaf_of]
        new_loss = _logloss(y, F + step, w)
        # backtrack so the training loss never increases
        shrink = 0
        while new_loss > loss and shrink < 40:
            tree.value *= 0.5
            step = step * 0.5
            new_loss = _logloss(y, F + step, w)
            shrink += 1
        if new_loss > loss:
            break
        F = F + step
        loss = new_loss
        losses.append(loss)
        trees.append(tree)
    return GBDTClassifier(names, scaler, config, base, trees, losses)
