"""Planted Gaussian blobs with equidistant centroids."""

import numpy as np


def planted_blobs(k: int, seed: int, n: int = 30, d: int = 5, separation: float = 6.0, sigma: float = 1.0):
    """``n`` points in ``k`` isotropic blobs whose centroids sit ``separation * sigma`` apart pairwise."""
    rng = np.random.default_rng(seed)
    U, S, _ = np.linalg.svd(np.eye(k) - 1.0 / k)
    simplex = np.zeros((k, d))
    simplex[:, : k - 1] = U[:, : k - 1] * S[: k - 1]  # pairwise distance sqrt(2)
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    centroids = simplex @ Q.T * separation * sigma / np.sqrt(2)
    labels = np.arange(n) % k
    return centroids[labels] + sigma * rng.standard_normal((n, d)), labels
