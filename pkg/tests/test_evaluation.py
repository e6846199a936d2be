import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parkipipe.datamodel import MODALITY_ORDER, Modality
from parkipipe.errors import InvalidParams, SingleClassTruth, TooFewSamplesPerClass
from parkipipe.evaluation import (
    ConstantPipeline,
    SingleModalityPipeline,
    StackPipeline,
    balanced_accuracy,
    cross_validate,
    evaluate,
    format_table,
    plan_for,
)
from parkipipe.features import extract_features
from parkipipe.folds import make_fold_plan
from parkipipe.stacking import StackSpec, Task, labels_for, task_ids
from parkipipe.synthcohort import DEFAULT_SIGNATURES, CohortSpec, generate


class TestBalancedAccuracy:
    def test_examples(self):
        y = np.r_[np.ones(10), np.zeros(10)].astype(int)
        assert balanced_accuracy(y, y) == 1.0
        assert balanced_accuracy(y, np.ones(20, dtype=int)) == 0.5
        pred = np.r_[np.ones(8), np.zeros(2), np.zeros(6), np.ones(4)].astype(int)
        assert balanced_accuracy(y, pred) == pytest.approx(0.7)

    def test_errors(self):
        with pytest.raises(SingleClassTruth):
            balanced_accuracy([1, 1], [1, 0])
        with pytest.raises(InvalidParams):
            balanced_accuracy([1, 0], [1])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.booleans(), min_size=2, max_size=60), st.integers(0, 2**31 - 1))
    def test_matches_sklearn(self, y, seed):
        from sklearn.metrics import balanced_accuracy_score

        y = np.array(y, dtype=int)
        if y.min() == y.max():
            return
        pred = np.random.default_rng(seed).integers(0, 2, y.size)
        assert balanced_accuracy(y, pred) == pytest.approx(balanced_accuracy_score(y, pred), abs=1e-12)


class TestFolds:
    def test_divisible(self):
        ids = [f"s{i:02d}" for i in range(20)]
        plan = make_fold_plan([1] * 10 + [0] * 10, ids, 3, 5, 0)
        lab = dict(zip(ids, [1] * 10 + [0] * 10))
        for _, _, test in plan.splits():
            assert sum(lab[i] for i in test) == 2 and len(test) == 4

    def test_table_counts(self):
        ids = [f"s{i:02d}" for i in range(44)]
        labels = [1] * 21 + [0] * 23
        lab = dict(zip(ids, labels))
        plan = make_fold_plan(labels, ids, 3, 5, 7)
        for r in range(3):
            seen = []
            for f in range(5):
                test = plan.test_ids(r, f)
                pos = sum(lab[i] for i in test)
                assert 4 <= pos <= 5 and 4 <= len(test) - pos <= 5
                seen += test
            assert sorted(seen) == ids

    def test_seeded(self):
        ids = [f"s{i}" for i in range(30)]
        labels = [i % 2 for i in range(30)]
        assert make_fold_plan(labels, ids, seed=3).to_dict() == make_fold_plan(labels, ids, seed=3).to_dict()
        assert make_fold_plan(labels, ids, seed=3).to_dict() != make_fold_plan(labels, ids, seed=4).to_dict()

    def test_too_few(self):
        with pytest.raises(TooFewSamplesPerClass):
            make_fold_plan([1, 1, 1, 0, 0, 0, 0, 0], list("abcdefgh"), 1, 5, 0)


@dataclasses.dataclass
class OraclePipeline:
    name: str = "oracle"

    def fit(self, data, task, train_ids, test_ids, observer=None):
        return self

    def predict(self, data, ids):
        return labels_for(data, ids)

    def describe(self):
        return {"type": "oracle"}


def test_constant_and_oracle(small_features):
    plan = plan_for(small_features, "pd-vs-hc", seed=1)
    const = cross_validate(small_features, "pd-vs-hc", ConstantPipeline(), plan)
    assert np.all(const.scores == 0.5) and const.std == 0.0 and len(const.folds) == 15
    oracle = cross_validate(small_features, "pd-vs-hc", OraclePipeline(), plan)
    assert oracle.mean == 1.0 and oracle.std == 0.0


def test_separable_quest():
    sigs = {k: dataclasses.replace(v, nms_prob=0.9 if k.startswith("PD") else 0.05) for k, v in DEFAULT_SIGNATURES.items()}
    spec = CohortSpec(counts={"tier1": {"PD": 0, "DD": 0, "HC": 0}, "complete": {"PD": 15, "DD": 0, "HC": 15}},
                      signatures=sigs, seed=3)
    fs = extract_features(generate(spec))
    rep = cross_validate(fs, "pd-vs-hc", SingleModalityPipeline("Quest", "gbdt"), plan_for(fs, "pd-vs-hc"))
    assert rep.mean >= 0.95


def test_test_fold_isolation(small_features):
    plan = plan_for(small_features, "pd-vs-dd", seed=2)
    current = {}
    violations = []

    def observer(purpose, modality, ids, index):
        if purpose == "fold":
            current["test"] = set(ids)
        elif set(ids) & current["test"]:
            violations.append((purpose, modality))

    spec = StackSpec(inner_folds=3)
    for pipe in (StackPipeline(spec), SingleModalityPipeline("Mov", "svm_rbf", use_aux=True)):
        cross_validate(small_features, "pd-vs-dd", pipe, plan, observer=observer)
    assert violations == []


def test_mean_std_conventions(small_features):
    plan = plan_for(small_features, "pd-vs-hc", seed=0)
    rep = cross_validate(small_features, "pd-vs-hc", SingleModalityPipeline("Tap", "gbdt"), plan)
    assert rep.mean == pytest.approx(sum(rep.scores) / 15, abs=1e-12)
    assert rep.std == pytest.approx(np.sqrt(np.mean((rep.scores - rep.mean) ** 2)), abs=1e-12)
    d = rep.to_dict()
    assert len(d["fold_scores"]) == 15 and d["std_convention"] == "population"
    assert sum(f["n_test"] for f in d["folds"]) == 3 * len(task_ids(small_features, Task.PD_VS_HC, MODALITY_ORDER))


def test_plan_must_match(small_features):
    plan = plan_for(small_features, "pd-vs-hc")
    with pytest.raises(InvalidParams):
        cross_validate(small_features, "pd-vs-dd", ConstantPipeline(), plan)


def test_parallel_equals_serial(small_features):
    pipes = [SingleModalityPipeline("Voice", "svm_rbf"), ConstantPipeline()]
    a = evaluate(small_features, "pd-vs-hc", pipes, seed=4, n_jobs=1)
    b = evaluate(small_features, "pd-vs-hc", pipes, seed=4, n_jobs=2)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]


def test_format_table(small_features):
    res = {
        t: evaluate(small_features, t, [ConstantPipeline(name="Quest."), OraclePipeline()], seed=0)
        for t in (Task.PD_VS_HC, Task.PD_VS_DD)
    }
    text = format_table(res)
    lines = text.splitlines()
    assert "PD vs. HC" in lines[0] and "PD vs. DD" in lines[0]
    assert "0.500 (0.000)" in lines[2] and "1.000 (0.000)" in lines[3]
