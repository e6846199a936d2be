"""Balanced accuracy, repeated stratified cross-validation and report tables.

Outer folds partition the subjects that have all four modalities. Subjects
with fewer modalities are never scored; they only feed the training pools of
pipelines that use them.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Protocol, Sequence

import numpy as np

from . import learners
from .datamodel import MODALITY_ORDER, Modality
from .errors import InvalidParams, SingleClassTruth
from .features import FeatureSet
from .folds import FoldPlan, make_fold_plan
from .stacking import FitObserver, StackSpec, Task, fit_stack, labels_for, task_ids

ROW_LABELS = {
    Modality.QUEST: "Quest.",
    Modality.MOV: "Mov.",
    Modality.VOICE: "Voice",
    Modality.TAP: "Finger Tapping",
}
STACK_LABEL = "Quest. + Mov. + Voice + Finger Tapping"


def balanced_accuracy(y_true, y_pred) -> float:
    """Mean of the two per-class recalls."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise InvalidParams("y_true and y_pred differ in length")
    classes = np.unique(y_true)
    if classes.size != 2:
        raise SingleClassTruth(f"y_true needs exactly two classes, got {classes.tolist()}")
    recalls = [np.mean(y_pred[y_true == c] == c) for c in classes]
    return float(np.mean(recalls))


class Predictor(Protocol):
    def predict(self, data: FeatureSet, ids: Sequence[str]) -> np.ndarray: ...


class Pipeline(Protocol):
    name: str

    def fit(self, data: FeatureSet, task: Task, train_ids: list[str], test_ids: list[str],
            observer: FitObserver | None = None) -> Predictor: ...

    def describe(self) -> dict: ...


@dataclass
class _ClassifierPredictor:
    modality: Modality
    clf: learners.Classifier

    def predict(self, data, ids):
        return self.clf.predict(data.X(self.modality, ids))


@dataclass
class SingleModalityPipeline:
    """One learner on one modality.

    By default it trains on the complete-modality training fold only;
    ``use_aux`` adds every other task subject with that modality.
    """

    modality: Modality
    kind: str
    config: object = None
    use_aux: bool = False
    name: str = ""

    def __post_init__(self):
        self.modality = Modality(self.modality)
        if self.config is None:
            self.config = learners.default_config(self.kind)
        if not self.name:
            self.name = ROW_LABELS[self.modality]

    def fit(self, data, task, train_ids, test_ids, observer=None):
        if self.use_aux:
            pool = task_ids(data, task, (self.modality,), exclude=test_ids)
        else:
            pool = sorted(train_ids)
        if observer:
            observer("single", self.modality, tuple(pool), None)
        clf = learners.fit(
            self.kind, data.X(self.modality, pool), labels_for(data, pool), config=self.config,
            feature_names=data.names(self.modality),
        )
        return _ClassifierPredictor(self.modality, clf)

    def describe(self):
        return {"type": "single", "modality": self.modality.value, "learner": self.kind,
                "config": asdict(self.config), "use_aux": self.use_aux}


@dataclass
class _StackPredictor:
    model: object

    def predict(self, data, ids):
        prob, _ = self.model.predict_ids(data, ids)
        return (prob >= 0.5).astype(int)


@dataclass
class StackPipeline:
    spec: StackSpec = field(default_factory=StackSpec)
    name: str = STACK_LABEL

    def fit(self, data, task, train_ids, test_ids, observer=None):
        return _StackPredictor(fit_stack(data, task, self.spec, exclude=test_ids, observer=observer))

    def describe(self):
        return {"type": "stack", "spec": self.spec.to_dict()}


@dataclass
class ConstantPipeline:
    label: int = 1
    name: str = "constant"

    def fit(self, data, task, train_ids, test_ids, observer=None):
        return self

    def predict(self, data, ids):
        return np.full(len(ids), self.label, dtype=int)

    def describe(self):
        return {"type": "constant", "label": self.label}


@dataclass(frozen=True)
class FoldResult:
    repeat: int
    fold: int
    balanced_accuracy: float
    tp: int
    fn: int
    tn: int
    fp: int

    @property
    def n_test(self) -> int:
        return self.tp + self.fn + self.tn + self.fp


@dataclass
class EvalReport:
    pipeline: str
    task: Task
    folds: list[FoldResult]
    seed: int
    config: dict

    @property
    def scores(self) -> np.ndarray:
        return np.array([f.balanced_accuracy for f in self.folds])

    @property
    def mean(self) -> float:
        return float(np.mean(self.scores))

    @property
    def std(self) -> float:
        # population convention (divisor N)
        return float(np.std(self.scores))

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.config, sort_keys=True).encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "pipeline": self.pipeline,
            "task": self.task.value,
            "fold_scores": self.scores.tolist(),
            "folds": [
                {**asdict(f), "n_test": f.n_test} for f in self.folds
            ],
            "mean": self.mean,
            "std": self.std,
            "std_convention": "population",
            "seed": self.seed,
            "config": self.config,
            "config_fingerprint": self.fingerprint,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        folds = [FoldResult(**{k: v for k, v in f.items() if k != "n_test"}) for f in d["folds"]]
        return cls(d["pipeline"], Task(d["task"]), folds, d["seed"], d["config"])


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("PARKIPIPE_THREADS", "1")))
    except ValueError:
        return 1


def _run_fold(data, task, pipeline, complete, test, observer=None):
    test_set = set(test)
    train = [s for s in complete if s not in test_set]
    model = pipeline.fit(data, task, train, list(test), observer)
    y_true = labels_for(data, test)
    y_pred = np.asarray(model.predict(data, test))
    return (
        balanced_accuracy(y_true, y_pred),
        int(np.sum((y_true == 1) & (y_pred == 1))),
        int(np.sum((y_true == 1) & (y_pred == 0))),
        int(np.sum((y_true == 0) & (y_pred == 0))),
        int(np.sum((y_true == 0) & (y_pred == 1))),
    )


def _run_fold_args(args):
    return _run_fold(*args)


def plan_for(data: FeatureSet, task: Task, repeats: int = 3, folds: int = 5, seed: int = 0) -> FoldPlan:
    complete = task_ids(data, Task(task), MODALITY_ORDER)
    return make_fold_plan(labels_for(data, complete).tolist(), complete, repeats, folds, seed)


def cross_validate(
    data: FeatureSet,
    task: Task | str,
    pipeline: Pipeline,
    plan: FoldPlan,
    observer: FitObserver | None = None,
    n_jobs: int | None = None,
) -> EvalReport:
    """Train from scratch per (repeat, fold) and score balanced accuracy on the held-out fold."""
    task = Task(task)
    complete = task_ids(data, task, MODALITY_ORDER)
    if sorted(plan.subject_ids) != complete:
        raise InvalidParams("fold plan does not cover the complete-modality subjects of this task")
    splits = list(plan.splits())
    n_jobs = _default_jobs() if n_jobs is None else n_jobs
    if n_jobs > 1 and observer is None:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_run_fold_args, [(data, task, pipeline, complete, t) for _, _, t in splits]))
    else:
        results = []
        for r, f, test in splits:
            if observer:
                observer("fold", None, tuple(test), f + r * plan.folds)
            results.append(_run_fold(data, task, pipeline, complete, test, observer))
    folds = [FoldResult(r, f, *res) for (r, f, _), res in zip(splits, results)]
    return EvalReport(pipeline.name, task, folds, plan.seed, pipeline.describe())


def default_pipelines(spec: StackSpec = StackSpec(), single_use_aux: bool = False) -> list:
    singles = [
        SingleModalityPipeline(m, spec.assignment[m], spec.config_for(m), use_aux=single_use_aux)
        for m in MODALITY_ORDER
    ]
    return singles + [StackPipeline(spec)]


def evaluate(
    data: FeatureSet,
    task: Task | str,
    pipelines=None,
    seed: int = 0,
    repeats: int = 3,
    folds: int = 5,
    n_jobs: int | None = None,
) -> list[EvalReport]:
    """All pipelines on one shared fold plan."""
    pipelines = default_pipelines() if pipelines is None else pipelines
    plan = plan_for(data, task, repeats, folds, seed)
    return [cross_validate(data, task, p, plan, n_jobs=n_jobs) for p in pipelines]


def format_table(results: dict) -> str:
    """Text table with pipelines as rows and tasks as columns, cells ``mean (STD)``."""
    tasks = list(results)
    rows: list[str] = []
    for reports in results.values():
        for rep in reports:
            if rep.pipeline not in rows:
                rows.append(rep.pipeline)
    header = ["Task"] + [Task(t).label for t in tasks]
    body = []
    for name in rows:
        cells = [name]
        for t in tasks:
            rep = next((r for r in results[t] if r.pipeline == name), None)
            cells.append(f"{rep.mean:.3f} ({rep.std:.3f})" if rep else "-")
        body.append(cells)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    fmt = lambda r: " | ".join(c.ljust(w) for c, w in zip(r, widths))  # noqa: E731
    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([fmt(header), sep] + [fmt(r) for r in body]) + "\n"
