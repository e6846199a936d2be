"""Per-modality feature extraction and the reduced clustering subset.

Widths are fixed: questionnaire 30, movement 264, voice 7, tapping 6 and the
clustering subset 26 (15 with the global movement reduction).
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import dsp
from .datamodel import (
    MOVEMENT_SLOTS,
    N_NMS_ITEMS,
    Cohort,
    DiseaseClass,
    Modality,
    MovementRecord,
    MovementTask,
    PdMotorType,
    QuestionnaireRecord,
    SubjectRecord,
    TapRecord,
    VoiceRecord,
    VoiceTask,
    Wrist,
    modality_mask,
)
from .errors import InvalidParams, MissingModality, MissingMovementRecord, PipelineError

log = logging.getLogger(__name__)

SENSORS = ("accel", "gyro")
AXES = ("x", "y", "z")
CLUSTER_SUBSET = "ClusterSubset"

QUEST_NAMES = tuple(f"nms_{i:02d}" for i in range(N_NMS_ITEMS))
MOV_NAMES = tuple(
    f"mov_{task.value}_{wrist.value}_{sensor}_{axis}_{f}hz"
    for task, wrist in MOVEMENT_SLOTS
    for sensor in SENSORS
    for axis in AXES
    for f in dsp.BAND_CENTERS
)
VOICE_NAMES = tuple(f"voice_jitter_{t.value}" for t in VoiceTask)
TAP_NAMES = ("tap_count_1", "tap_count_2", "tap_count_3", "tap_speed_1", "tap_speed_2", "tap_speed_3")
CLUSTER_MOV_NAMES = tuple(
    f"mov_relaxed_{wrist.value}_{sensor}_{axis}_sum" for wrist in Wrist for sensor in SENSORS for axis in AXES
)
NAMES = {
    Modality.QUEST: QUEST_NAMES,
    Modality.MOV: MOV_NAMES,
    Modality.VOICE: VOICE_NAMES,
    Modality.TAP: TAP_NAMES,
}


def cluster_names(mov_reduction: str = "channel") -> tuple[str, ...]:
    mov = CLUSTER_MOV_NAMES if mov_reduction == "channel" else ("mov_relaxed_total_sum",)
    return ("quest_sum",) + mov + VOICE_NAMES + TAP_NAMES


@dataclass(frozen=True, eq=False)
class FeatureVector:
    names: tuple[str, ...]
    values: np.ndarray
    modality: str
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if len(self.names) != values.size or len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique and match the value count")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"non-finite {self.modality} feature values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values.tolist()))


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    subject_ids: tuple[str, ...]
    names: tuple[str, ...]
    values: np.ndarray
    modality: str
    skipped: tuple[tuple[str, str], ...] = ()  # (subject id, reason)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).reshape(len(self.subject_ids), len(self.names))
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "subject_ids", tuple(self.subject_ids))
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def rows(self, ids: Iterable[str]) -> np.ndarray:
        index = {sid: i for i, sid in enumerate(self.subject_ids)}
        return self.values[[index[i] for i in ids]]

    def columns(self, names: Iterable[str]) -> "FeatureMatrix":
        col = {n: i for i, n in enumerate(self.names)}
        names = tuple(names)
        return FeatureMatrix(self.subject_ids, names, self.values[:, [col[n] for n in names]], self.modality)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("subject_id",) + self.names)
            for sid, row in zip(self.subject_ids, self.values):
                w.writerow([sid] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, modality: str = "") -> "FeatureMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        ids = [r[0] for r in body]
        values = np.array([[float(v) for v in r[1:]] for r in body]).reshape(len(body), len(header) - 1)
        return cls(tuple(ids), tuple(header[1:]), values, modality or Path(path).stem.replace("features_", ""))


# --- per-modality extractors ------------------------------------------------


def extract_questionnaire(q: QuestionnaireRecord) -> FeatureVector:
    return FeatureVector(QUEST_NAMES, np.array(q.answers, dtype=float), Modality.QUEST.value)


def _channel_bands(rec: MovementRecord, params: dsp.WelchParams) -> np.ndarray:
    """Band powers for the 6 channels of one record, shape (2 sensors, 3 axes, 11)."""
    out = np.empty((len(SENSORS), len(AXES), len(dsp.BAND_CENTERS)))
    for s, data in enumerate((rec.accel, rec.gyro)):
        data = dsp.resample_linear(data, rec.sample_rate)
        for a in range(len(AXES)):
            out[s, a] = dsp.band_powers(dsp.welch_psd(data[a], dsp.REFERENCE_RATE, params))
    return out


def _movement_slots(records) -> dict:
    if isinstance(records, Mapping):
        slots = dict(records)
    else:
        slots = {(r.task, r.wrist): r for r in records}
    missing = [f"{t.value}/{w.value}" for t, w in MOVEMENT_SLOTS if (t, w) not in slots]
    if missing:
        raise MissingMovementRecord(f"missing movement records: {', '.join(missing)}")
    return slots


def extract_movement(records, params: dsp.WelchParams = dsp.WelchParams()) -> FeatureVector:
    """Welch band powers 2..12 Hz for task x wrist x sensor x axis (264 values)."""
    slots = _movement_slots(records)
    values = np.concatenate([_channel_bands(slots[slot], params).ravel() for slot in MOVEMENT_SLOTS])
    return FeatureVector(MOV_NAMES, values, Modality.MOV.value)


def extract_voice(records: Iterable[VoiceRecord], **pitch_kwargs) -> FeatureVector:
    """Local jitter per voice task slot; absent or failing slots are zero with a warning.

    Several recordings of the same task are averaged.
    """
    records = list(records)
    if not records:
        raise MissingModality("no voice records")
    by_task: dict[VoiceTask, list[float]] = {}
    errors: list[PipelineError] = []
    warnings = []
    for rec in records:
        try:
            track = dsp.pitch_track(rec.samples, rec.sample_rate, **pitch_kwargs)
            by_task.setdefault(rec.task_id, []).append(dsp.local_jitter(track))
        except PipelineError as exc:
            errors.append(exc)
            warnings.append(f"{rec.task_id.value}: {exc}")
    if not by_task:
        raise errors[0]
    values = []
    for task in VoiceTask:
        if task in by_task:
            values.append(float(np.mean(by_task[task])))
        else:
            values.append(0.0)
            if not any(w.startswith(task.value + ":") for w in warnings):
                warnings.append(f"{task.value}: missing, jitter set to 0")
    return FeatureVector(VOICE_NAMES, np.array(values), Modality.VOICE.value, tuple(warnings))


def extract_tap(taps: TapRecord, speed: str = "spatial") -> FeatureVector:
    stats = dsp.tap_segment_stats(taps, 3, speed=speed)
    values = [s.count for s in stats] + [s.avg_speed for s in stats]
    return FeatureVector(TAP_NAMES, np.array(values, dtype=float), Modality.TAP.value)


def relaxed_channel_sums(records, params: dsp.WelchParams = dsp.WelchParams()) -> np.ndarray:
    """Summed 2..12 Hz band power per Relaxed channel (wrist, sensor, axis order)."""
    slots = _movement_slots(records)
    return np.concatenate(
        [_channel_bands(slots[(MovementTask.RELAXED, w)], params).sum(axis=-1).ravel() for w in Wrist]
    )


def reduce_cluster_subset(
    quest: np.ndarray,
    mov: np.ndarray,
    voice: np.ndarray,
    tap: np.ndarray,
    mov_reduction: str = "channel",
) -> np.ndarray:
    """Row-wise reduction of full feature vectors to the clustering subset.

    ``mov`` holds the 264 movement features; only the Relaxed task is kept and
    its 11 bands are summed per channel (or over everything for ``global``).
    Works on single vectors or on matrices with one subject per row.
    """
    if mov_reduction not in ("channel", "global"):
        raise InvalidParams(f"unknown movement reduction {mov_reduction!r}")
    quest, mov, voice, tap = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (quest, mov, voice, tap))
    n_bands = len(dsp.BAND_CENTERS)
    per_slot = mov.reshape(len(mov), len(MOVEMENT_SLOTS), len(SENSORS) * len(AXES), n_bands)
    relaxed = [i for i, (t, _) in enumerate(MOVEMENT_SLOTS) if t is MovementTask.RELAXED]
    sums = per_slot[:, relaxed].sum(axis=-1).reshape(len(mov), -1)
    if mov_reduction == "global":
        sums = sums.sum(axis=1, keepdims=True)
    out = np.hstack([quest.sum(axis=1, keepdims=True), sums, voice, tap])
    return out


def build_cluster_features(
    subject: SubjectRecord,
    mov_reduction: str = "channel",
    params: dsp.WelchParams = dsp.WelchParams(),
    tap_speed: str = "spatial",
) -> FeatureVector:
    """Questionnaire sum, Relaxed movement power sums, voice jitter and tapping."""
    missing = {m.value for m in Modality} - {m.value for m in modality_mask(subject)}
    if missing:
        raise MissingModality(f"{subject.id}: missing {sorted(missing)}")
    voice = extract_voice(subject.voice)
    values = reduce_cluster_subset(
        extract_questionnaire(subject.questionnaire).values,
        extract_movement(subject.movement, params).values,
        voice.values,
        extract_tap(subject.taps, tap_speed).values,
        mov_reduction,
    )[0]
    return FeatureVector(cluster_names(mov_reduction), values, CLUSTER_SUBSET, voice.warnings)


# --- cohort level -----------------------------------------------------------


def _extract_one(subject: SubjectRecord, modality: Modality, params, tap_speed) -> FeatureVector:
    if modality is Modality.QUEST:
        return extract_questionnaire(subject.questionnaire)
    if modality is Modality.MOV:
        return extract_movement(subject.movement, params)
    if modality is Modality.VOICE:
        return extract_voice(subject.voice)
    return extract_tap(subject.taps, tap_speed)


def assemble(
    cohort: Cohort,
    modality,
    params: dsp.WelchParams = dsp.WelchParams(),
    tap_speed: str = "spatial",
    mov_reduction: str = "channel",
) -> FeatureMatrix:
    """Feature matrix for every subject possessing ``modality``, in cohort order.

    Subjects lacking the modality, or whose extraction raises a domain error,
    are listed in ``skipped``.
    """
    if modality == CLUSTER_SUBSET:
        ids, rows, skipped = [], [], []
        for s in cohort:
            try:
                rows.append(build_cluster_features(s, mov_reduction, params, tap_speed).values)
                ids.append(s.id)
            except PipelineError as exc:
                skipped.append((s.id, str(exc)))
        return FeatureMatrix(tuple(ids), cluster_names(mov_reduction), np.array(rows), CLUSTER_SUBSET, tuple(skipped))

    modality = Modality(modality)
    ids, rows, skipped = [], [], []
    for s in cohort:
        if modality not in modality_mask(s):
            skipped.append((s.id, f"no {modality.value} data"))
            continue
        try:
            fv = _extract_one(s, modality, params, tap_speed)
        except PipelineError as exc:
            skipped.append((s.id, str(exc)))
            continue
        for w in fv.warnings:
            log.warning("%s: %s", s.id, w)
        ids.append(s.id)
        rows.append(fv.values)
    return FeatureMatrix(tuple(ids), NAMES[modality], np.array(rows), modality.value, tuple(skipped))


@dataclass(eq=False)
class FeatureSet:
    """Extracted features of a whole cohort plus the labels learners need.

    Extraction happens once; stacking and cross-validation slice by subject id.
    """

    matrices: dict[Modality, FeatureMatrix]
    disease: dict[str, DiseaseClass]
    motor_type: dict[str, PdMotorType | None] = field(default_factory=dict)
    order: tuple[str, ...] = ()

    def has(self, subject_id: str, modality: Modality) -> bool:
        return subject_id in self._index(modality)

    def _index(self, modality: Modality) -> dict[str, int]:
        cache = self.__dict__.setdefault("_idx", {})
        if modality not in cache:
            cache[modality] = {sid: i for i, sid in enumerate(self.matrices[modality].subject_ids)}
        return cache[modality]

    def ids_with(self, modality: Modality) -> set[str]:
        return set(self._index(modality))

    def complete_ids(self) -> set[str]:
        out = set(self.disease)
        for m in Modality:
            out &= self.ids_with(m)
        return out

    def X(self, modality: Modality, ids) -> np.ndarray:
        index = self._index(modality)
        return self.matrices[modality].values[[index[i] for i in ids]]

    def names(self, modality: Modality) -> tuple[str, ...]:
        return self.matrices[modality].names

    def cluster_matrix(self, ids, mov_reduction: str = "channel") -> FeatureMatrix:
        ids = tuple(ids)
        values = reduce_cluster_subset(
            self.X(Modality.QUEST, ids),
            self.X(Modality.MOV, ids),
            self.X(Modality.VOICE, ids),
            self.X(Modality.TAP, ids),
            mov_reduction,
        )
        return FeatureMatrix(ids, cluster_names(mov_reduction), values, CLUSTER_SUBSET)


def extract_features(
    cohort: Cohort,
    params: dsp.WelchParams = dsp.WelchParams(),
    tap_speed: str = "spatial",
) -> FeatureSet:
    matrices = {m: assemble(cohort, m, params, tap_speed) for m in Modality}
    return FeatureSet(
        matrices=matrices,
        disease={s.id: s.disease for s in cohort},
        motor_type={s.id: s.motor_type for s in cohort},
        order=tuple(cohort.ids),
    )
