"""Stratified fold assignment shared by outer cross-validation and inner stacking folds."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import TooFewSamplesPerClass
from .seeding import substream


def stratified_assign(ids: Sequence[str], labels: Sequence, folds: int, rng: np.random.Generator) -> dict[str, int]:
    """Shuffle within each class and deal round-robin into ``folds``.

    Subjects are sorted by id before shuffling, so the result depends only on
    the (id, label) pairs and the generator, never on input order. Dealing
    continues across classes so fold sizes differ by at most one.
    """
    pairs = sorted(zip(ids, labels), key=lambda p: p[0])
    classes = sorted({lab for _, lab in pairs}, key=str)
    out: dict[str, int] = {}
    cursor = 0
    for cls in classes:
        members = [sid for sid, lab in pairs if lab == cls]
        if len(members) < folds:
            raise TooFewSamplesPerClass(f"class {cls!r} has {len(members)} samples for {folds} folds")
        order = rng.permutation(len(members))
        for k, i in enumerate(order):
            out[members[i]] = (cursor + k) % folds
        cursor = (cursor + len(members)) % folds
    return out


@dataclass(frozen=True)
class FoldPlan:
    repeats: int
    folds: int
    seed: int
    assignments: tuple[Mapping[str, int], ...]

    @property
    def subject_ids(self) -> list[str]:
        return sorted(self.assignments[0]) if self.assignments else []

    def test_ids(self, repeat: int, fold: int) -> list[str]:
        return sorted(sid for sid, f in self.assignments[repeat].items() if f == fold)

    def splits(self):
        for r in range(self.repeats):
            for f in range(self.folds):
                yield r, f, self.test_ids(r, f)

    def to_dict(self) -> dict:
        return {
            "repeats": self.repeats,
            "folds": self.folds,
            "seed": self.seed,
            "assignments": [dict(sorted(a.items())) for a in self.assignments],
        }


def make_fold_plan(labels, subject_ids, repeats: int = 3, folds: int = 5, seed: int = 0) -> FoldPlan:
    """Repeated stratified K-fold; repeat ``r`` uses the generator keyed ``(seed, r)``."""
    labels = list(labels)
    subject_ids = list(subject_ids)
    assignments = tuple(
        stratified_assign(subject_ids, labels, folds, substream(seed, "cv", r)) for r in range(repeats)
    )
    return FoldPlan(repeats, folds, seed, assignments)
