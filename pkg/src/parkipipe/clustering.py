"""Agglomerative clustering of PD subjects, largest-gap dendrogram cuts and
motor-type composition tables.

Merging uses Lance-Williams updates on Euclidean distances. Ward heights
follow the common convention where the merge height is the Ward distance
``sqrt(2 n_a n_b / (n_a + n_b)) * ||c_a - c_b||``. Node ids follow the usual
linkage-matrix layout: leaves are ``0..n-1`` and merge ``i`` creates node
``n + i``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .datamodel import DiseaseClass, Modality, PdMotorType
from .errors import DegenerateInput, InvalidParams, NonPdSubject
from .features import CLUSTER_SUBSET, FeatureMatrix, FeatureSet, extract_features

LINKAGES = ("ward", "complete", "average", "single")
LOW_SEPARATION_RATIO = 1.5
TYPE_ORDER = (PdMotorType.T, PdMotorType.AR, PdMotorType.ART, PdMotorType.UNKNOWN)


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    height: float
    size: int


@dataclass
class Dendrogram:
    merges: list[Merge]
    leaf_ids: tuple[str, ...]
    linkage: str = "ward"

    @property
    def n(self) -> int:
        return len(self.leaf_ids)

    @property
    def heights(self) -> np.ndarray:
        return np.array([m.height for m in self.merges])

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.heights) >= 0))

    def as_linkage_matrix(self) -> np.ndarray:
        return np.array([[m.left, m.right, m.height, m.size] for m in self.merges], dtype=float)

    def leaf_order(self) -> list[int]:
        """Leaves left to right as drawn."""
        if self.n == 1:
            return [0]
        out, stack = [], [2 * self.n - 2]
        while stack:
            node = stack.pop()
            if node < self.n:
                out.append(node)
            else:
                m = self.merges[node - self.n]
                stack += [m.right, m.left]
        return out

    def to_dict(self) -> dict:
        return {
            "linkage": self.linkage,
            "leaf_ids": list(self.leaf_ids),
            "merges": [[m.left, m.right, m.height, m.size] for m in self.merges],
        }


def agglomerate(
    X,
    linkage: str = "ward",
    standardize: bool = True,
    ids: Sequence[str] | None = None,
) -> Dendrogram:
    """Hierarchical clustering of the rows of ``X``.

    A FeatureMatrix is first sorted by subject id so the tree does not depend
    on input order. Ties between equally close pairs go to the pair whose
    smallest member leaves come first.
    """
    if linkage not in LINKAGES:
        raise InvalidParams(f"unknown linkage {linkage!r}; expected one of {LINKAGES}")
    if isinstance(X, FeatureMatrix):
        order = np.argsort(np.array(X.subject_ids, dtype=object), kind="stable")
        ids = tuple(X.subject_ids[i] for i in order)
        X = X.values[order]
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n < 2:
        raise DegenerateInput(f"need at least 2 samples to cluster, got {n}")
    if not np.all(np.isfinite(X)):
        raise DegenerateInput("feature matrix contains NaN or Inf")
    ids = tuple(ids) if ids is not None else tuple(str(i) for i in range(n))
    if standardize:
        sd = X.std(axis=0)
        X = (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)

    D = np.sqrt(np.maximum(np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1), 0.0))
    np.fill_diagonal(D, np.inf)
    active = np.ones(n, dtype=bool)
    node = np.arange(n)  # node id held in each slot
    size = np.ones(n)
    merges = []
    for step in range(n - 1):
        masked = np.where(active[:, None] & active[None, :], D, np.inf)
        masked[np.tril_indices(n)] = np.inf
        flat = int(np.argmin(masked))  # row-major: lowest (i, j) wins ties
        i, j = divmod(flat, n)
        h = float(masked[i, j])
        ni, nj = size[i], size[j]
        others = active.copy()
        others[[i, j]] = False
        k = np.flatnonzero(others)
        dik, djk, nk = D[i, k], D[j, k], size[k]
        if linkage == "ward":
            new = np.sqrt(np.maximum(((ni + nk) * dik**2 + (nj + nk) * djk**2 - nk * h**2) / (ni + nj + nk), 0.0))
        elif linkage == "complete":
            new = np.maximum(dik, djk)
        elif linkage == "single":
            new = np.minimum(dik, djk)
        else:
            new = (ni * dik + nj * djk) / (ni + nj)
        a, b = sorted((int(node[i]), int(node[j])))
        merges.append(Merge(a, b, h, int(ni + nj)))
        D[i, k] = D[k, i] = new
        active[j] = False
        size[i] = ni + nj
        node[i] = n + step
    return Dendrogram(merges, ids, linkage)


@dataclass
class ClusterAssignment:
    labels: dict[str, int]  # subject id -> 1..k
    k: int
    cut_index: int  # number of merges performed
    gaps: tuple[float, ...] = ()

    @property
    def gap_ratio(self) -> float:
        """Largest gap over the runner-up; inf when there is no runner-up."""
        g = sorted(self.gaps, reverse=True)
        if len(g) < 2 or g[1] <= 0:
            return float("inf") if g and g[0] > 0 else 1.0
        return g[0] / g[1]

    @property
    def low_separation(self) -> bool:
        return self.gap_ratio < LOW_SEPARATION_RATIO

    def members(self, label: int) -> list[str]:
        return sorted(s for s, c in self.labels.items() if c == label)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "cut_index": self.cut_index,
            "gap_ratio": self.gap_ratio if np.isfinite(self.gap_ratio) else None,
            "low_separation": self.low_separation,
            "labels": dict(sorted(self.labels.items())),
        }


def _flat_labels(d: Dendrogram, n_merges: int) -> np.ndarray:
    """Union-find over the first ``n_merges`` merges; labels ordered by first leaf."""
    parent = list(range(2 * d.n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for step, m in enumerate(d.merges[:n_merges]):
        parent[find(m.left)] = d.n + step
        parent[find(m.right)] = d.n + step
    roots = [find(i) for i in range(d.n)]
    label_of: dict[int, int] = {}
    for r in roots:
        label_of.setdefault(r, len(label_of) + 1)
    return np.array([label_of[r] for r in roots])


def cut_by_largest_gap(d: Dendrogram) -> ClusterAssignment:
    """Cut where consecutive merge heights jump the most.

    With heights ``h_1..h_{n-1}`` pick ``j`` maximising ``h_{j+1} - h_j``
    (ties to the smaller ``j``), keep merges ``1..j`` and return ``k = n - j``
    clusters. Labels are numbered by the first subject (in id order) of each
    cluster.
    """
    if d.n < 3:
        raise DegenerateInput(f"gap cut needs at least 3 leaves, got {d.n}")
    gaps = np.diff(d.heights)
    j = int(np.argmax(gaps)) + 1
    labels = _flat_labels(d, j)
    return ClusterAssignment(dict(zip(d.leaf_ids, labels.tolist())), d.n - j, j, tuple(gaps.tolist()))


def cut_at_k(d: Dendrogram, k: int) -> ClusterAssignment:
    if not 1 <= k <= d.n:
        raise InvalidParams(f"k must be in [1, {d.n}]")
    labels = _flat_labels(d, d.n - k)
    return ClusterAssignment(dict(zip(d.leaf_ids, labels.tolist())), k, d.n - k, tuple(np.diff(d.heights).tolist()))


@dataclass
class CompositionTable:
    clusters: list[int]
    sizes: list[int]
    percent: np.ndarray  # clusters x TYPE_ORDER, rounded to 2 decimals
    prefix: str = "C"

    def to_dict(self) -> dict:
        return {
            "types": [t.value for t in TYPE_ORDER],
            "clusters": [
                {"cluster": f"{self.prefix}{c}", "size": n, "percent": dict(zip((t.value for t in TYPE_ORDER), row))}
                for c, n, row in zip(self.clusters, self.sizes, self.percent.tolist())
            ],
        }

    def to_text(self) -> str:
        header = ["Cluster", "n"] + [f"{t.value}-type" if t is not PdMotorType.UNKNOWN else "Unknown" for t in TYPE_ORDER]
        rows = [
            [f"{self.prefix}{c}", str(n)] + [f"{v:.2f}" for v in row]
            for c, n, row in zip(self.clusters, self.sizes, self.percent)
        ]
        widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
        lines = [" | ".join(c.rjust(w) for c, w in zip(r, widths)) for r in [header] + rows]
        lines.insert(1, "-+-".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


def composition_table(assign: ClusterAssignment, motor_types: dict, disease: dict | None = None, prefix="C"):
    """Percentage of each PD motor type inside every cluster.

    ``motor_types`` maps subject id to PdMotorType (or a Cohort/FeatureSet
    providing one); a subject that is not PD, or has no motor type, raises
    NonPdSubject.
    """
    if isinstance(motor_types, FeatureSet):
        disease = motor_types.disease
        motor_types = motor_types.motor_type
    elif hasattr(motor_types, "subjects"):
        disease = {s.id: s.disease for s in motor_types}
        motor_types = {s.id: s.motor_type for s in motor_types}
    clusters = sorted(set(assign.labels.values()))
    counts = np.zeros((len(clusters), len(TYPE_ORDER)))
    for sid, c in assign.labels.items():
        if disease is not None and disease.get(sid) is not DiseaseClass.PD:
            raise NonPdSubject(f"{sid} is not a PD subject")
        t = motor_types.get(sid)
        if t is None:
            raise NonPdSubject(f"{sid} has no PD motor type")
        counts[clusters.index(c), TYPE_ORDER.index(PdMotorType(t))] += 1
    sizes = counts.sum(axis=1)
    percent = np.round(100.0 * counts / sizes[:, None], 2)
    return CompositionTable(clusters, sizes.astype(int).tolist(), percent, prefix)


def adjusted_rand_index(a: Sequence, b: Sequence) -> float:
    """Chance-corrected pair agreement between two labelings (Hubert & Arabie)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise InvalidParams("labelings differ in length")
    n = a.size
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(table).sum()
    sum_a = comb2(table.sum(axis=1)).sum()
    sum_b = comb2(table.sum(axis=0)).sum()
    total = comb2(n)
    expected = sum_a * sum_b / total if total > 0 else 0.0
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 1.0  # both labelings trivial (all-same or all-distinct) and identical in structure
    return float((sum_ij - expected) / (max_index - expected))


def crosstab(a: dict, b: dict) -> dict:
    """Counts of subjects per (label in a, label in b)."""
    out: dict = {}
    for sid in sorted(a):
        key = (a[sid], b[sid])
        out[key] = out.get(key, 0) + 1
    return out


@dataclass
class ClusterRun:
    name: str
    matrix: FeatureMatrix
    dendrogram: Dendrogram
    assignment: ClusterAssignment
    composition: CompositionTable

    @property
    def k(self) -> int:
        return self.assignment.k

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "features": list(self.matrix.names),
            "n_subjects": len(self.matrix.subject_ids),
            "k": self.k,
            "assignment": self.assignment.to_dict(),
            "dendrogram": self.dendrogram.to_dict(),
            "composition": self.composition.to_dict(),
        }


def cluster_run(name, matrix, motor_types, disease=None, linkage="ward", standardize=True, prefix="C") -> ClusterRun:
    d = agglomerate(matrix, linkage, standardize)
    if linkage == "ward" and not d.is_monotone():
        raise AssertionError("Ward merge heights decreased; linkage update is broken")
    a = cut_by_largest_gap(d)
    return ClusterRun(name, matrix, d, a, composition_table(a, motor_types, disease, prefix))


@dataclass
class ModalComparison:
    single: ClusterRun
    multi: ClusterRun
    table: dict = field(default_factory=dict)  # (single label, multi label) -> count

    @property
    def ari(self) -> float:
        ids = sorted(self.single.assignment.labels)
        return adjusted_rand_index(
            [self.single.assignment.labels[i] for i in ids], [self.multi.assignment.labels[i] for i in ids]
        )

    def to_dict(self) -> dict:
        return {
            "k_single": self.single.k,
            "k_multi": self.multi.k,
            "ari_single_vs_multi": self.ari,
            "crosstab": [
                {"single": f"S{s}", "multi": f"M{m}", "count": c} for (s, m), c in sorted(self.table.items())
            ],
        }

    def crosstab_text(self) -> str:
        ks, km = self.single.k, self.multi.k
        head = ["", *[f"M{m}" for m in range(1, km + 1)]]
        rows = [[f"S{s}", *[str(self.table.get((s, m), 0)) for m in range(1, km + 1)]] for s in range(1, ks + 1)]
        widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]
        return "\n".join(" ".join(c.rjust(w) for c, w in zip(r, widths)) for r in [head] + rows) + "\n"


def compare_modal_runs(
    data,
    linkage: str = "ward",
    standardize: bool = True,
    mov_reduction: str = "channel",
) -> ModalComparison:
    """Cluster PD subjects on movement columns alone and on the full subset.

    Both views use the reduced clustering features of PD subjects that have
    every modality.
    """
    if not isinstance(data, FeatureSet):
        data = extract_features(data)
    ids = sorted(i for i in data.complete_ids() if data.disease[i] is DiseaseClass.PD)
    if len(ids) < 3:
        raise DegenerateInput(f"need at least 3 PD subjects with all modalities, got {len(ids)}")
    full = data.cluster_matrix(ids, mov_reduction)
    mov_cols = [n for n in full.names if n.startswith("mov_")]
    single = cluster_run("single_modal", full.columns(mov_cols), data.motor_type, data.disease, linkage, standardize, "S")
    multi = cluster_run("multi_modal", full, data.motor_type, data.disease, linkage, standardize, "M")
    return ModalComparison(single, multi, crosstab(single.assignment.labels, multi.assignment.labels))


# --- rendering ---------------------------------------------------------------


def dendrogram_svg(d: Dendrogram, assign: ClusterAssignment | None = None, width=640, height=360) -> str:
    """Plain SVG dendrogram; the dashed line marks the gap cut."""
    pad_l, pad_r, pad_t, pad_b = 50, 10, 10, 60
    order = d.leaf_order()
    xs = {leaf: pad_l + (i + 0.5) * (width - pad_l - pad_r) / d.n for i, leaf in enumerate(order)}
    top = max(d.heights.max(), 1e-12) * 1.05

    def y(h):
        return pad_t + (1.0 - h / top) * (height - pad_t - pad_b)

    pos = {leaf: (xs[leaf], 0.0) for leaf in range(d.n)}
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="9">',
        f'<line x1="{pad_l}" y1="{y(0):.2f}" x2="{pad_l}" y2="{y(top):.2f}" stroke="#555"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        h = frac * top
        parts.append(f'<text x="{pad_l - 4}" y="{y(h) + 3:.2f}" text-anchor="end">{h:.3g}</text>')
    for step, m in enumerate(d.merges):
        (xl, hl), (xr, hr) = pos[m.left], pos[m.right]
        parts.append(
            f'<polyline fill="none" stroke="#1f4e79" points="{xl:.2f},{y(hl):.2f} {xl:.2f},{y(m.height):.2f} '
            f'{xr:.2f},{y(m.height):.2f} {xr:.2f},{y(hr):.2f}"/>'
        )
        pos[d.n + step] = ((xl + xr) / 2.0, m.height)
    for leaf in order:
        x = xs[leaf]
        parts.append(
            f'<text x="{x:.2f}" y="{y(0) + 6:.2f}" transform="rotate(90 {x:.2f} {y(0) + 6:.2f})">{d.leaf_ids[leaf]}</text>'
        )
    if assign is not None and 0 < assign.cut_index < len(d.merges):
        h_cut = (d.heights[assign.cut_index - 1] + d.heights[assign.cut_index]) / 2.0
        parts.append(
            f'<line x1="{pad_l}" y1="{y(h_cut):.2f}" x2="{width - pad_r}" y2="{y(h_cut):.2f}" '
            f'stroke="#c00" stroke-dasharray="4 3"/>'
        )
        parts.append(f'<text x="{width - pad_r}" y="{y(h_cut) - 3:.2f}" text-anchor="end" fill="#c00">k={assign.k}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def run_to_json(run: ClusterRun) -> str:
    return json.dumps(run.to_dict(), indent=1, sort_keys=True)
