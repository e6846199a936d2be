"""Cohort directories on disk.

Layout::

    cohort.json                       manifest: schema_version, seed, subjects, metadata
    <subject>/subject.json            per-subject labels and sample rates
    <subject>/questionnaire.json      30 booleans
    <subject>/movement/<task>_<wrist>.csv   t,ax,ay,az,gx,gy,gz
    <subject>/voice/<task_id>.csv     sample
    <subject>/taps.csv                t,x,y

Numbers are written with ``repr`` so a write/read cycle is exact and a
rewrite of the same cohort is byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .datamodel import (
    SCHEMA_VERSION,
    Cohort,
    MovementRecord,
    MovementTask,
    QuestionnaireRecord,
    SubjectRecord,
    TapRecord,
    VoiceRecord,
    VoiceTask,
    Wrist,
    modality_mask,
    MODALITY_ORDER,
)
from .errors import InvalidRecord, SchemaError

MANIFEST = "cohort.json"
SUBJECT_FILE = "subject.json"
MOVEMENT_HEADER = "t,ax,ay,az,gx,gy,gz"


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _num(v: float) -> str:
    return repr(float(v))


def _write_rows(path: Path, header: str, rows: np.ndarray) -> None:
    lines = [header]
    lines += [",".join(map(_num, r)) for r in rows.tolist()] if rows.ndim == 2 else list(map(_num, rows.tolist()))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_rows(path: Path, header: str, width: int) -> np.ndarray:
    text = path.read_text(encoding="utf-8")
    first, _, body = text.partition("\n")
    if first.strip() != header:
        raise InvalidRecord(f"{path}: expected header {header!r}, got {first.strip()!r}")
    values = np.array(body.replace(",", " ").split(), dtype=float)
    if values.size % width:
        raise InvalidRecord(f"{path}: ragged rows")
    return values.reshape(-1, width)


def subject_manifest(s: SubjectRecord) -> dict:
    return {
        "id": s.id,
        "disease": s.disease.value,
        "motor_type": s.motor_type.value if s.motor_type else None,
        "modalities": [m.value for m in MODALITY_ORDER if m in modality_mask(s)],
        "questionnaire": s.questionnaire is not None,
        "movement": [
            {"task": m.task.value, "wrist": m.wrist.value, "sample_rate": m.sample_rate} for m in s.movement
        ],
        "voice": [{"task_id": v.task_id.value, "sample_rate": v.sample_rate} for v in s.voice],
        "taps": None if s.taps is None else {"duration": s.taps.duration},
    }


def write_subject(s: SubjectRecord, root: Path) -> None:
    d = Path(root) / s.id
    d.mkdir(parents=True, exist_ok=True)
    _dump_json(subject_manifest(s), d / SUBJECT_FILE)
    if s.questionnaire is not None:
        _dump_json(list(s.questionnaire.answers), d / "questionnaire.json")
    if s.movement:
        (d / "movement").mkdir(exist_ok=True)
    for m in s.movement:
        t = np.arange(m.n_samples) / m.sample_rate
        _write_rows(d / "movement" / f"{m.task.value}_{m.wrist.value}.csv", MOVEMENT_HEADER,
                    np.column_stack([t, m.accel.T, m.gyro.T]))
    if s.voice:
        (d / "voice").mkdir(exist_ok=True)
    for v in s.voice:
        _write_rows(d / "voice" / f"{v.task_id.value}.csv", "sample", v.samples)
    if s.taps is not None:
        _write_rows(d / "taps.csv", "t,x,y", s.taps.events.reshape(-1, 3))


def write_cohort(cohort: Cohort, root) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for s in cohort:
        write_subject(s, root)
    _dump_json(
        {
            "schema_version": cohort.schema_version,
            "seed": cohort.seed,
            "metadata": cohort.metadata,
            "subjects": [subject_manifest(s) for s in cohort],
        },
        root / MANIFEST,
    )
    return root


def read_subject(d, entry: dict | None = None) -> SubjectRecord:
    d = Path(d)
    if entry is None:
        if not (d / SUBJECT_FILE).exists():
            raise InvalidRecord(f"{d}: no {SUBJECT_FILE}")
        entry = json.loads((d / SUBJECT_FILE).read_text(encoding="utf-8"))
    quest = None
    if entry.get("questionnaire"):
        quest = QuestionnaireRecord(tuple(json.loads((d / "questionnaire.json").read_text(encoding="utf-8"))))
    movement = []
    for m in entry.get("movement", []):
        rows = _read_rows(d / "movement" / f"{m['task']}_{m['wrist']}.csv", MOVEMENT_HEADER, 7)
        movement.append(MovementRecord(MovementTask(m["task"]), Wrist(m["wrist"]), m["sample_rate"], rows[:, 1:4].T, rows[:, 4:7].T))
    voice = []
    for v in entry.get("voice", []):
        rows = _read_rows(d / "voice" / f"{v['task_id']}.csv", "sample", 1)
        voice.append(VoiceRecord(VoiceTask(v["task_id"]), v["sample_rate"], rows[:, 0]))
    taps = None
    if entry.get("taps") is not None:
        taps = TapRecord(_read_rows(d / "taps.csv", "t,x,y", 3), entry["taps"]["duration"])
    return SubjectRecord(entry["id"], entry["disease"], entry.get("motor_type"), quest, tuple(movement), tuple(voice), taps)


def read_cohort(root) -> Cohort:
    root = Path(root)
    path = root / MANIFEST
    if not path.exists():
        raise InvalidRecord(f"{root}: not a cohort directory (no {MANIFEST})")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported cohort schema_version {manifest.get('schema_version')!r}")
    subjects = tuple(read_subject(root / e["id"], e) for e in manifest["subjects"])
    return Cohort(subjects, manifest["schema_version"], manifest.get("seed"), manifest.get("metadata", {}))
