"""Stacking across modalities with unequal sample pools.

Each modality's base classifier trains on every task subject that has that
modality (questionnaire and movement pools are far larger than the set of
subjects with all four modalities). The logistic meta-model trains on
out-of-fold base probabilities of the complete-modality subjects: for inner
fold ``j`` the temporary base models see their full pools minus fold ``j``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Iterable

import numpy as np

from . import learners
from .datamodel import MODALITY_ORDER, Cohort, DiseaseClass, Modality, SubjectRecord, modality_mask
from .dsp import WelchParams
from .errors import InsufficientCompleteSamples, MissingModality, SchemaError
from .features import FeatureSet, _extract_one, extract_features
from .folds import stratified_assign
from .learners import Classifier, GBDTConfig, LogRegConfig, SVMConfig
from .seeding import derive_seed, substream

STACK_SCHEMA = 1

# (purpose, modality, training subject ids, inner fold or None)
FitObserver = Callable[[str, Modality | None, tuple[str, ...], int | None], None]


class Task(str, Enum):
    PD_VS_HC = "pd-vs-hc"
    PD_VS_DD = "pd-vs-dd"

    @property
    def negative(self) -> DiseaseClass:
        return DiseaseClass.HC if self is Task.PD_VS_HC else DiseaseClass.DD

    @property
    def classes(self) -> frozenset[DiseaseClass]:
        return frozenset({DiseaseClass.PD, self.negative})

    @property
    def label(self) -> str:
        return f"PD vs. {self.negative.value}"


def labels_for(data: FeatureSet, ids: Iterable[str]) -> np.ndarray:
    """1 for PD, 0 otherwise."""
    return np.array([1 if data.disease[i] is DiseaseClass.PD else 0 for i in ids], dtype=int)


def task_ids(data: FeatureSet, task: Task, modalities: Iterable[Modality] = (), exclude=()) -> list[str]:
    """Sorted task-class subjects having every modality in ``modalities``."""
    exclude = set(exclude)
    ids = {i for i, d in data.disease.items() if d in task.classes} - exclude
    for m in modalities:
        ids &= data.ids_with(m)
    return sorted(ids)


DEFAULT_ASSIGNMENT = {
    Modality.QUEST: "gbdt",
    Modality.MOV: "svm_rbf",
    Modality.VOICE: "svm_rbf",
    Modality.TAP: "gbdt",
}

_CONFIG_TYPES = {"gbdt": GBDTConfig, "svm_rbf": SVMConfig, "svm_linear": SVMConfig, "logreg": LogRegConfig}


@dataclass(frozen=True)
class StackSpec:
    assignment: dict = field(default_factory=lambda: dict(DEFAULT_ASSIGNMENT))
    learner_configs: dict = field(default_factory=dict)  # Modality -> config override
    meta: LogRegConfig = LogRegConfig()
    inner_folds: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        assignment = {Modality(k): v for k, v in self.assignment.items()}
        if set(assignment) != set(Modality):
            raise ValueError("every modality needs a learner assignment")
        for kind in assignment.values():
            if kind not in _CONFIG_TYPES:
                raise ValueError(f"unknown learner kind {kind!r}")
        if self.inner_folds < 2:
            raise ValueError("inner_folds must be >= 2")
        object.__setattr__(self, "assignment", assignment)
        object.__setattr__(self, "learner_configs", {Modality(k): v for k, v in self.learner_configs.items()})

    def config_for(self, modality: Modality):
        if modality in self.learner_configs:
            return self.learner_configs[modality]
        return learners.default_config(self.assignment[modality], derive_seed(self.seed, "learner", modality.value))

    def to_dict(self) -> dict:
        return {
            "assignment": {m.value: self.assignment[m] for m in MODALITY_ORDER},
            "learner_configs": {m.value: asdict(self.config_for(m)) for m in MODALITY_ORDER},
            "meta": asdict(self.meta),
            "inner_folds": self.inner_folds,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StackSpec":
        assignment = {Modality(k): v for k, v in d["assignment"].items()}
        configs = {
            Modality(k): _CONFIG_TYPES[assignment[Modality(k)]](**v) for k, v in d.get("learner_configs", {}).items()
        }
        return cls(assignment, configs, LogRegConfig(**d.get("meta", {})), d.get("inner_folds", 5), d.get("seed", 0))


@dataclass(frozen=True)
class StackPrediction:
    label: int
    probability: float
    per_modality: dict

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "probability": self.probability,
            "per_modality": {m.value if isinstance(m, Modality) else m: p for m, p in self.per_modality.items()},
        }


META_NAMES = tuple(f"p_{m.value.lower()}" for m in MODALITY_ORDER)


@dataclass(eq=False)
class StackedModel:
    task: Task
    spec: StackSpec
    base: dict  # Modality -> Classifier
    meta: Classifier
    n_pool: dict = field(default_factory=dict)  # Modality -> training pool size
    n_meta: int = 0

    def base_probabilities(self, rows: dict) -> np.ndarray:
        """Columns of base probabilities in fixed modality order, one row per subject."""
        return np.column_stack([self.base[m].predict_proba(rows[m]) for m in MODALITY_ORDER])

    def predict_rows(self, rows: dict) -> tuple[np.ndarray, np.ndarray]:
        P = self.base_probabilities(rows)
        return self.meta.predict_proba(P), P

    def predict_ids(self, data: FeatureSet, ids) -> tuple[np.ndarray, np.ndarray]:
        ids = list(ids)
        return self.predict_rows({m: data.X(m, ids) for m in MODALITY_ORDER})

    def to_dict(self) -> dict:
        return {
            "stack_schema": STACK_SCHEMA,
            "task": self.task.value,
            "spec": self.spec.to_dict(),
            "modality_order": [m.value for m in MODALITY_ORDER],
            "base": {m.value: self.base[m].to_dict() for m in MODALITY_ORDER},
            "meta": self.meta.to_dict(),
            "n_pool": {m.value: n for m, n in self.n_pool.items()},
            "n_meta": self.n_meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "StackedModel":
        if d.get("stack_schema") != STACK_SCHEMA:
            raise SchemaError(f"unsupported stack_schema {d.get('stack_schema')!r}")
        return cls(
            task=Task(d["task"]),
            spec=StackSpec.from_dict(d["spec"]),
            base={Modality(k): Classifier.from_dict(v) for k, v in d["base"].items()},
            meta=Classifier.from_dict(d["meta"]),
            n_pool={Modality(k): v for k, v in d.get("n_pool", {}).items()},
            n_meta=d.get("n_meta", 0),
        )

    @classmethod
    def from_json(cls, text: str) -> "StackedModel":
        return cls.from_dict(json.loads(text))


def _fit_base(data: FeatureSet, modality: Modality, ids: list[str], spec: StackSpec) -> Classifier:
    return learners.fit(
        spec.assignment[modality],
        data.X(modality, ids),
        labels_for(data, ids),
        config=spec.config_for(modality),
        feature_names=data.names(modality),
    )


def fit_stack(
    data,
    task: Task | str,
    spec: StackSpec = StackSpec(),
    exclude: Iterable[str] = (),
    observer: FitObserver | None = None,
) -> StackedModel:
    """Fit base models on their modality pools and the meta-model on out-of-fold outputs.

    ``exclude`` removes subjects from every pool (used for outer test folds).
    """
    if isinstance(data, Cohort):
        data = extract_features(data)
    task = Task(task)
    exclude = set(exclude)
    complete = task_ids(data, task, MODALITY_ORDER, exclude)
    y_complete = labels_for(data, complete)
    n_min = min(int(np.sum(y_complete == 1)), int(np.sum(y_complete == 0)))
    if n_min < 2 * spec.inner_folds:
        raise InsufficientCompleteSamples(
            f"{task.label}: smallest class has {n_min} complete-modality subjects, "
            f"need {2 * spec.inner_folds} for {spec.inner_folds} inner folds"
        )
    pools = {m: task_ids(data, task, (m,), exclude) for m in MODALITY_ORDER}

    fold_of = stratified_assign(complete, y_complete.tolist(), spec.inner_folds, substream(spec.seed, "inner"))
    meta_X = np.zeros((len(complete), len(MODALITY_ORDER)))
    position = {sid: i for i, sid in enumerate(complete)}
    for j in range(spec.inner_folds):
        held = [sid for sid in complete if fold_of[sid] == j]
        held_set = set(held)
        rows = [position[s] for s in held]
        for c, m in enumerate(MODALITY_ORDER):
            train = [sid for sid in pools[m] if sid not in held_set]
            if observer:
                observer("inner", m, tuple(train), j)
            clf = _fit_base(data, m, train, spec)
            meta_X[rows, c] = clf.predict_proba(data.X(m, held))

    base = {}
    for m in MODALITY_ORDER:
        if observer:
            observer("base", m, tuple(pools[m]), None)
        base[m] = _fit_base(data, m, pools[m], spec)
    if observer:
        observer("meta", None, tuple(complete), None)
    meta = learners.fit_logreg(meta_X, y_complete, config=spec.meta, feature_names=META_NAMES)
    return StackedModel(task, spec, base, meta, {m: len(p) for m, p in pools.items()}, len(complete))


def predict_stack(model: StackedModel, subject: SubjectRecord) -> StackPrediction:
    missing = set(Modality) - modality_mask(subject)
    if missing:
        raise MissingModality(f"{subject.id}: missing {sorted(m.value for m in missing)}")
    rows = {m: _extract_one(subject, m, WelchParams(), "spatial").values[None, :] for m in MODALITY_ORDER}
    prob, P = model.predict_rows(rows)
    p = float(prob[0])
    return StackPrediction(int(p >= 0.5), p, {m: float(P[0, c]) for c, m in enumerate(MODALITY_ORDER)})

