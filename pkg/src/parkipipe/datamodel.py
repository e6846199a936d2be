"""Core domain types: labels, per-modality raw records, subjects and cohorts.

Records validate themselves on construction and are immutable afterwards
(frozen dataclasses holding read-only arrays), so a ``SubjectRecord`` can be
shared freely between workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

import numpy as np

from .errors import InvalidRecord

SCHEMA_VERSION = 1


class DiseaseClass(str, Enum):
    PD = "PD"
    DD = "DD"
    HC = "HC"


class PdMotorType(str, Enum):
    T = "T"
    AR = "AR"
    ART = "ART"
    UNKNOWN = "Unknown"


class Modality(str, Enum):
    QUEST = "Quest"
    MOV = "Mov"
    VOICE = "Voice"
    TAP = "Tap"


ALL_MODALITIES = frozenset(Modality)
# fixed order used by stacking and reports
MODALITY_ORDER = (Modality.QUEST, Modality.MOV, Modality.VOICE, Modality.TAP)


class MovementTask(str, Enum):
    RELAXED = "relaxed"
    LIFT_AND_HOLD = "lift_and_hold"


class Wrist(str, Enum):
    LEFT = "left"
    RIGHT = "right"


class VoiceTask(str, Enum):
    VOWEL_A = "vowel_a"
    VOWEL_I = "vowel_i"
    VOWEL_O = "vowel_o"
    SYLLABLE_PAH = "syllable_pah"
    SYLLABLE_TAH = "syllable_tah"
    SYLLABLE_KAH = "syllable_kah"
    SENTENCE = "sentence"

    @property
    def family(self) -> str:
        return self.value.split("_")[0]


VOICE_FAMILIES = ("vowel", "syllable", "sentence")
MOVEMENT_SLOTS = tuple((task, wrist) for task in MovementTask for wrist in Wrist)

N_NMS_ITEMS = 30
MIN_MOVEMENT_SECONDS = 5.0
MIN_VOICE_RATE = 8000.0
MIN_VOICE_SECONDS = 0.5


def _frozen_array(values, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise InvalidRecord(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidRecord(f"{name} contains NaN or Inf")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class QuestionnaireRecord:
    answers: tuple[bool, ...]

    def __post_init__(self) -> None:
        answers = tuple(bool(a) for a in self.answers)
        if len(answers) != N_NMS_ITEMS:
            raise InvalidRecord(f"questionnaire needs {N_NMS_ITEMS} answers, got {len(answers)}")
        object.__setattr__(self, "answers", answers)


@dataclass(frozen=True, eq=False)
class MovementRecord:
    """One smartwatch recording: 3xN acceleration (m/s^2) and rotation (rad/s)."""

    task: MovementTask
    wrist: Wrist
    sample_rate: float
    accel: np.ndarray
    gyro: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "task", MovementTask(self.task))
        object.__setattr__(self, "wrist", Wrist(self.wrist))
        if not self.sample_rate > 0:
            raise InvalidRecord(f"sample_rate must be > 0, got {self.sample_rate}")
        accel = _frozen_array(self.accel, 2, "accel")
        gyro = _frozen_array(self.gyro, 2, "gyro")
        if accel.shape[0] != 3 or gyro.shape[0] != 3:
            raise InvalidRecord("accel and gyro must have 3 rows (x, y, z)")
        if accel.shape != gyro.shape:
            raise InvalidRecord(f"accel/gyro length mismatch: {accel.shape} vs {gyro.shape}")
        if accel.shape[1] < self.sample_rate * MIN_MOVEMENT_SECONDS:
            raise InvalidRecord(
                f"movement record shorter than {MIN_MOVEMENT_SECONDS} s "
                f"({accel.shape[1]} samples at {self.sample_rate} Hz)"
            )
        object.__setattr__(self, "accel", accel)
        object.__setattr__(self, "gyro", gyro)

    @property
    def n_samples(self) -> int:
        return self.accel.shape[1]


@dataclass(frozen=True, eq=False)
class VoiceRecord:
    task_id: VoiceTask
    sample_rate: float
    samples: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "task_id", VoiceTask(self.task_id))
        if self.sample_rate < MIN_VOICE_RATE:
            raise InvalidRecord(f"voice sample_rate must be >= {MIN_VOICE_RATE:g} Hz")
        samples = _frozen_array(self.samples, 1, "samples")
        if samples.size and np.max(np.abs(samples)) > 1.0:
            raise InvalidRecord("voice samples must lie in [-1, 1]")
        if samples.size < self.sample_rate * MIN_VOICE_SECONDS:
            raise InvalidRecord(f"voice record shorter than {MIN_VOICE_SECONDS} s")
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True, eq=False)
class TapRecord:
    """Touch events as an (n, 3) array of ``t, x, y``."""

    events: np.ndarray
    duration: float = 15.0

    def __post_init__(self) -> None:
        events = np.array(self.events, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(events)):
            raise InvalidRecord("tap events contain NaN or Inf")
        if not self.duration > 0:
            raise InvalidRecord("tap duration must be > 0")
        t = events[:, 0]
        if np.any(np.diff(t) <= 0):
            raise InvalidRecord("tap times must be strictly increasing")
        if t.size and (t[0] < 0 or t[-1] >= self.duration):
            raise InvalidRecord("tap times must satisfy 0 <= t < duration")
        events.setflags(write=False)
        object.__setattr__(self, "events", events)

    @property
    def times(self) -> np.ndarray:
        return self.events[:, 0]


@dataclass(frozen=True, eq=False)
class SubjectRecord:
    id: str
    disease: DiseaseClass
    motor_type: PdMotorType | None = None
    questionnaire: QuestionnaireRecord | None = None
    movement: tuple[MovementRecord, ...] = ()
    voice: tuple[VoiceRecord, ...] = ()
    taps: TapRecord | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "disease", DiseaseClass(self.disease))
        if self.motor_type is not None:
            object.__setattr__(self, "motor_type", PdMotorType(self.motor_type))
            if self.disease is not DiseaseClass.PD:
                raise InvalidRecord(f"{self.id}: motor_type set on a {self.disease.value} subject")
        movement = tuple(self.movement)
        voice = tuple(self.voice)
        slots = [(m.task, m.wrist) for m in movement]
        if len(set(slots)) != len(slots):
            raise InvalidRecord(f"{self.id}: duplicate (task, wrist) movement records")
        object.__setattr__(self, "movement", movement)
        object.__setattr__(self, "voice", voice)
        if self.questionnaire is None and not movement and not voice and self.taps is None:
            raise InvalidRecord(f"{self.id}: subject has no modality")

    def movement_by_slot(self) -> dict[tuple[MovementTask, Wrist], MovementRecord]:
        return {(m.task, m.wrist): m for m in self.movement}


def modality_mask(subject: SubjectRecord) -> frozenset[Modality]:
    """Modalities for which the subject carries complete data.

    Movement counts only when all four (task, wrist) slots exist; voice only
    when at least one vowel, one syllable and one sentence recording exist.
    """
    mask = set()
    if subject.questionnaire is not None:
        mask.add(Modality.QUEST)
    if set(subject.movement_by_slot()) == set(MOVEMENT_SLOTS):
        mask.add(Modality.MOV)
    if {v.task_id.family for v in subject.voice} >= set(VOICE_FAMILIES):
        mask.add(Modality.VOICE)
    if subject.taps is not None:
        mask.add(Modality.TAP)
    return frozenset(mask)


@dataclass(frozen=True, eq=False)
class Cohort:
    subjects: tuple[SubjectRecord, ...]
    schema_version: int = SCHEMA_VERSION
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        subjects = tuple(self.subjects)
        ids = [s.id for s in subjects]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise InvalidRecord(f"duplicate subject ids: {dupes[:5]}")
        object.__setattr__(self, "subjects", subjects)

    def __len__(self) -> int:
        return len(self.subjects)

    def __iter__(self):
        return iter(self.subjects)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.subjects]

    def get(self, subject_id: str) -> SubjectRecord:
        for s in self.subjects:
            if s.id == subject_id:
                return s
        raise KeyError(subject_id)

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for s in self.subjects:
            out[s.disease.value] = out.get(s.disease.value, 0) + 1
        return out


def filter_cohort(
    cohort: Cohort,
    required: Iterable[Modality] = (),
    classes: Iterable[DiseaseClass] = tuple(DiseaseClass),
) -> Cohort:
    """Subjects whose modality mask covers ``required`` and whose class is in ``classes``."""
    required = frozenset(Modality(m) for m in required)
    classes = frozenset(DiseaseClass(c) for c in classes)
    kept = tuple(
        s for s in cohort.subjects if s.disease in classes and required <= modality_mask(s)
    )
    return Cohort(kept, cohort.schema_version, cohort.seed, dict(cohort.metadata))
