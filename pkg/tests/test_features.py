import numpy as np
import pytest

from parkipipe import dsp
from parkipipe.datamodel import Cohort, Modality, MovementTask, QuestionnaireRecord, SubjectRecord, VoiceTask, Wrist
from parkipipe.errors import MissingModality, NoVoicedFrames
from parkipipe.features import (
    CLUSTER_SUBSET,
    MOV_NAMES,
    assemble,
    build_cluster_features,
    cluster_names,
    extract_movement,
    extract_questionnaire,
    extract_tap,
    extract_voice,
    FeatureMatrix,
)

from helpers import movement, subject, taps, voice


def test_widths():
    s = subject()
    assert extract_questionnaire(s.questionnaire).values.size == 30
    assert extract_movement(s.movement).values.size == 264
    assert extract_voice(s.voice).values.size == 7
    assert extract_tap(s.taps).values.size == 6
    assert build_cluster_features(s).values.size == 26
    assert len(cluster_names("global")) == 15


def test_questionnaire():
    assert np.all(extract_questionnaire(QuestionnaireRecord((False,) * 30)).values == 0)
    assert np.all(extract_questionnaire(QuestionnaireRecord((True,) * 30)).values == 1)
    answers = [i in (2, 5) for i in range(30)]
    np.testing.assert_array_equal(np.flatnonzero(extract_questionnaire(QuestionnaireRecord(answers)).values), [2, 5])


def _sine5(t, task, wrist, k):
    return np.sin(2 * np.pi * 5.0 * t + k)


def test_movement_sine_peaks_in_its_band():
    fv = extract_movement(movement(fn=_sine5)).as_dict()
    channels = {n.rsplit("_", 1)[0] for n in MOV_NAMES}
    for ch in channels:
        bands = [fv[f"{ch}_{f}hz"] for f in dsp.BAND_CENTERS]
        assert fv[f"{ch}_5hz"] == max(bands)


def test_movement_zero():
    assert np.all(extract_movement(movement()).values == 0)


def test_movement_wrist_swap():
    def fn(t, task, wrist, k):
        f = 4.0 if wrist is Wrist.LEFT else 9.0
        return (k + 1) * np.sin(2 * np.pi * f * t)

    recs = movement(fn=fn)
    swapped = [type(r)(r.task, Wrist.RIGHT if r.wrist is Wrist.LEFT else Wrist.LEFT, r.sample_rate, r.accel, r.gyro)
               for r in recs]
    a = extract_movement(recs).as_dict()
    b = extract_movement(swapped).as_dict()
    swap = lambda n: n.replace("_left_", "_TMP_").replace("_right_", "_left_").replace("_TMP_", "_right_")  # noqa: E731
    for name, v in a.items():
        assert b[swap(name)] == v


def test_movement_resamples_other_rates():
    a = extract_movement(movement(fn=_sine5, rate=50.0)).values
    b = extract_movement(movement(fn=_sine5, rate=100.0)).values
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


def test_voice_periodic_is_zero():
    np.testing.assert_allclose(extract_voice(voice(jitter=0.0)).values, 0.0, atol=1e-3)


def test_voice_single_slot():
    fv = extract_voice(voice((VoiceTask.VOWEL_A,), jitter=0.02, seed=3))
    # the oracle is the programmed contour at the voiced frames the tracker kept
    from parkipipe.synthcohort import voiced_signal

    x, contour = voiced_signal(np.random.default_rng(3), 8000.0, 1.0, 105.0, 0.02)
    truth = dsp.local_jitter(contour.at(dsp.pitch_track(x, 8000.0).times))
    assert fv.values[0] == pytest.approx(truth, rel=0.05)
    assert np.all(fv.values[1:] == 0)
    assert len(fv.warnings) == 6


def test_voice_unvoiced_raises():
    from parkipipe.datamodel import VoiceRecord

    rec = VoiceRecord("vowel_a", 8000.0, 0.3 * np.random.default_rng(0).uniform(-1, 1, 8000))
    with pytest.raises(NoVoicedFrames):
        extract_voice([rec])


def test_tap_features():
    np.testing.assert_array_equal(extract_tap(taps()).values, [10, 10, 10, 0, 0, 0])
    np.testing.assert_array_equal(extract_tap(taps([])).values, np.zeros(6))
    t = np.r_[np.arange(20) * 0.25, 5 + np.arange(10) * 0.5, 10 + np.arange(5) * 1.0]
    c = extract_tap(taps(t)).values[:3]
    assert c[0] > c[1] > c[2]


def test_cluster_subset_consistency():
    def fn(t, task, wrist, k):
        return np.sin(2 * np.pi * 5.0 * t) if k == 0 else 0.0 * t

    s = SubjectRecord("c", "PD", None, QuestionnaireRecord((True,) * 30), movement(fn=fn), voice(), taps())
    fv = build_cluster_features(s).as_dict()
    assert fv["quest_sum"] == 30
    mv = extract_movement(s.movement).as_dict()
    for w in ("left", "right"):
        for sensor in ("accel", "gyro"):
            expect = sum(mv[f"mov_relaxed_{w}_{sensor}_x_{f}hz"] for f in dsp.BAND_CENTERS)
            assert fv[f"mov_relaxed_{w}_{sensor}_x_sum"] == pytest.approx(expect, rel=1e-9)
            assert fv[f"mov_relaxed_{w}_{sensor}_y_sum"] == 0
    zero = build_cluster_features(subject()).as_dict()
    assert all(v == 0 for k, v in zero.items() if k.startswith("mov_"))


def test_cluster_subset_requires_everything():
    with pytest.raises(MissingModality):
        build_cluster_features(subject(taps_=False))


def test_assemble_shapes_and_skips(tmp_path):
    tier1 = Cohort(tuple(subject(f"t{i}", voice_=False, taps_=False) for i in range(4)))
    fm = assemble(tier1, Modality.VOICE)
    assert fm.shape == (0, 7) and len(fm.skipped) == 4
    full = Cohort(tuple(subject(f"f{i:02d}") for i in range(44)))
    a = assemble(full, Modality.MOV)
    assert a.shape == (44, 264)
    b = assemble(full, Modality.MOV)
    assert np.array_equal(a.values, b.values)
    cs = assemble(full, CLUSTER_SUBSET)
    assert cs.shape == (44, 26)
    a.to_csv(tmp_path / "features_Mov.csv")
    r = FeatureMatrix.from_csv(tmp_path / "features_Mov.csv")
    assert r.names == a.names and r.subject_ids == a.subject_ids and np.array_equal(r.values, a.values)


def test_featureset_cluster_matrix_matches_direct(small_cohort, small_features):
    ids = sorted(small_features.complete_ids())[:5]
    fm = small_features.cluster_matrix(ids)
    for i, sid in enumerate(ids):
        direct = build_cluster_features(small_cohort.get(sid)).values
        np.testing.assert_allclose(fm.values[i], direct, rtol=1e-12)
