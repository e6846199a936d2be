"""Small record builders shared by the unit tests."""

import numpy as np

from parkipipe.datamodel import (
    MOVEMENT_SLOTS,
    MovementRecord,
    QuestionnaireRecord,
    SubjectRecord,
    TapRecord,
    VoiceRecord,
    VoiceTask,
)
from parkipipe.synthcohort import voiced_signal


def movement(slots=MOVEMENT_SLOTS, fn=None, rate=50.0, seconds=15.0):
    n = int(rate * seconds)
    t = np.arange(n) / rate
    out = []
    for task, wrist in slots:
        sig = np.zeros((3, n)) if fn is None else np.vstack([fn(t, task, wrist, k) for k in range(3)])
        out.append(MovementRecord(task, wrist, rate, sig, sig.copy()))
    return tuple(out)


def voice(tasks=tuple(VoiceTask), jitter=0.0, seed=0, rate=8000.0):
    rng = np.random.default_rng(seed)
    return tuple(VoiceRecord(t, rate, voiced_signal(rng, rate, 1.0, 105.0, jitter)[0]) for t in tasks)


def taps(times=None, xy=(5.0, 7.0)):
    t = np.arange(30) * 0.5 + 0.25 if times is None else np.asarray(times, dtype=float)
    return TapRecord(np.column_stack([t, np.full(t.size, xy[0]), np.full(t.size, xy[1])]))


def subject(sid="s1", disease="PD", motor_type=None, quest=True, mov=True, voice_=True, taps_=True):
    return SubjectRecord(
        sid,
        disease,
        motor_type,
        QuestionnaireRecord((False,) * 30) if quest else None,
        movement() if mov else (),
        voice() if voice_ else (),
        taps() if taps_ else None,
    )
