"""Seeded synthetic cohorts with class signatures and planted PD subtypes.

Signals are deliberately simple. Movement channels carry a sinusoidal tremor
plus white noise, voice is a harmonic pulse train whose period follows a
block-constant contour with programmed jitter, taps alternate between two
screen targets at a slowing rate, and questionnaire items are independent
Bernoulli draws.

Every subject draws its planted attributes from the substream
``(seed, "plan", index)`` and its signals from ``(seed, "signal", index)``,
so subjects can be generated in any order and ``ground_truth`` never has to
synthesise a signal.
"""

from __future__ import annotations

import json

from dataclasses import asdict, dataclass, field, fields, replace
from typing import Mapping

import numpy as np

from .datamodel import (
    MOVEMENT_SLOTS,
    N_NMS_ITEMS,
    Cohort,
    DiseaseClass,
    MovementRecord,
    MovementTask,
    PdMotorType,
    QuestionnaireRecord,
    SubjectRecord,
    TapRecord,
    VoiceRecord,
    VoiceTask,
    Wrist,
)
from .errors import InvalidSpec, UnknownSubject
from .seeding import substream

TIERS = ("tier1", "complete")
GROUPS = ("HC", "DD", "PD_T", "PD_AR", "PD_ART")
GRAVITY = 9.81


@dataclass(frozen=True)
class Signature:
    rest_tremor_amp: float  # m/s^2 during Relaxed
    action_tremor_amp: float  # m/s^2 during Lift and Hold
    tremor_freq_range: tuple[float, float]  # Hz
    jitter: float  # local jitter of the voice period contour
    tap_rate: float  # taps/s at the start of the trial
    tap_decay: float  # fraction of the start rate lost by the end
    nms_prob: float  # mean probability of a "yes" answer

    def __post_init__(self) -> None:
        object.__setattr__(self, "tremor_freq_range", tuple(float(f) for f in self.tremor_freq_range))

    def validate(self, name: str) -> None:
        lo, hi = self.tremor_freq_range
        if not 2.0 <= lo <= hi <= 12.0:
            raise InvalidSpec(f"{name}: tremor_freq_range must lie within [2, 12] Hz")
        if min(self.rest_tremor_amp, self.action_tremor_amp, self.jitter) < 0:
            raise InvalidSpec(f"{name}: amplitudes and jitter must be >= 0")
        if not 0 <= self.nms_prob <= 1 or not 0 <= self.tap_decay < 1:
            raise InvalidSpec(f"{name}: nms_prob must be in [0, 1] and tap_decay in [0, 1)")
        if not self.tap_rate > 0:
            raise InvalidSpec(f"{name}: tap_rate must be > 0")
        if self.jitter > 0.1:
            raise InvalidSpec(f"{name}: jitter above 0.1 is outside the voice generator's range")


DEFAULT_SIGNATURES = {
    "HC": Signature(0.02, 0.03, (8.0, 11.0), 0.005, 4.6, 0.06, 0.14),
    "DD": Signature(0.06, 0.14, (5.0, 8.0), 0.007, 4.1, 0.12, 0.16),
    "PD_T": Signature(0.18, 0.07, (4.0, 6.0), 0.009, 3.9, 0.16, 0.28),
    "PD_AR": Signature(0.03, 0.04, (4.0, 6.0), 0.010, 3.3, 0.32, 0.30),
    "PD_ART": Signature(0.12, 0.06, (4.0, 6.0), 0.010, 3.6, 0.24, 0.30),
}

DEFAULT_COUNTS = {
    "tier1": {"PD": 279, "DD": 133, "HC": 90},
    "complete": {"PD": 21, "DD": 27, "HC": 23},
}

DEFAULT_SUBTYPE_MIX = {"T": 0.35, "AR": 0.30, "ART": 0.25, "Unknown": 0.10}


@dataclass(frozen=True)
class NoiseSpec:
    accel_sd: float = 0.05  # m/s^2 white noise
    gyro_sd: float = 0.03  # rad/s white noise
    gyro_per_accel: float = 0.6  # rad/s of rotation tremor per m/s^2 of acceleration tremor
    floor_spread: float = 0.5  # lognormal sigma of the per-subject noise floor
    amp_spread: float = 0.7  # lognormal sigma of the per-subject tremor amplitude
    jitter_spread: float = 0.35  # lognormal sigma of the per-subject jitter level
    tap_rate_spread: float = 0.18  # lognormal sigma of the per-subject tapping rate
    tap_interval_cv: float = 0.12  # per-interval coefficient of variation
    tap_position_sd: float = 12.0  # px
    nms_item_spread: float = 0.5  # item weights drawn from U(1 - s, 1 + s)
    orientation_spread: float = 0.3  # sd of the per-subject perturbation of the tremor axis
    contralateral_ratio: float = 0.5  # PD tremor amplitude on the non-dominant wrist
    voice_noise_sd: float = 0.005

    def validate(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise InvalidSpec(f"noise.{f.name} must be >= 0")
        if self.nms_item_spread >= 1:
            raise InvalidSpec("noise.nms_item_spread must be < 1")
        if self.contralateral_ratio > 1:
            raise InvalidSpec("noise.contralateral_ratio must be <= 1")


@dataclass(frozen=True)
class Phenotype:
    """A planted PD subgroup of the complete tier with its own signature overrides."""

    name: str
    count: int
    motor_type: str = "Unknown"
    base: str = "PD_T"
    overrides: Mapping = field(default_factory=dict)

    def signature(self, signatures: Mapping) -> Signature:
        return replace(signatures[self.base], **dict(self.overrides))


@dataclass(frozen=True)
class CohortSpec:
    counts: Mapping = field(default_factory=lambda: {t: dict(c) for t, c in DEFAULT_COUNTS.items()})
    subtype_mix: Mapping = field(default_factory=lambda: dict(DEFAULT_SUBTYPE_MIX))
    signatures: Mapping = field(default_factory=lambda: dict(DEFAULT_SIGNATURES))
    effect_scale: float = 1.0  # 0 collapses every class onto the HC signature
    noise: NoiseSpec = NoiseSpec()
    movement_rate: float = 50.0
    movement_seconds: float = 15.0
    voice_rate: float = 8000.0
    voice_seconds: float = 1.0
    f0_range: tuple[float, float] = (95.0, 115.0)
    tap_duration: float = 15.0
    phenotypes: tuple = ()
    seed: int = 0

    def __post_init__(self) -> None:
        sigs = {k: v if isinstance(v, Signature) else Signature(**v) for k, v in self.signatures.items()}
        object.__setattr__(self, "signatures", {**DEFAULT_SIGNATURES, **sigs})
        object.__setattr__(self, "counts", {t: {c: int(n) for c, n in v.items()} for t, v in self.counts.items()})
        object.__setattr__(
            self, "phenotypes", tuple(p if isinstance(p, Phenotype) else Phenotype(**p) for p in self.phenotypes)
        )
        if isinstance(self.noise, Mapping):
            object.__setattr__(self, "noise", NoiseSpec(**self.noise))
        object.__setattr__(self, "f0_range", tuple(float(f) for f in self.f0_range))
        self.validate()

    def validate(self) -> None:
        if set(self.counts) - set(TIERS):
            raise InvalidSpec(f"unknown tiers {sorted(set(self.counts) - set(TIERS))}")
        for tier, per_class in self.counts.items():
            for cls, n in per_class.items():
                if cls not in DiseaseClass.__members__:
                    raise InvalidSpec(f"unknown class {cls!r} in counts")
                if n < 0:
                    raise InvalidSpec(f"negative count for {tier}/{cls}")
        mix = {PdMotorType(k): float(v) for k, v in self.subtype_mix.items()}
        if any(v < 0 for v in mix.values()) or not np.isclose(sum(mix.values()), 1.0):
            raise InvalidSpec("subtype_mix must be non-negative and sum to 1")
        for name, sig in self.signatures.items():
            if name not in GROUPS:
                raise InvalidSpec(f"unknown signature group {name!r}")
            sig.validate(name)
        if not 0 <= self.effect_scale <= 1:
            raise InvalidSpec("effect_scale must be in [0, 1]")
        self.noise.validate()
        if self.movement_rate <= 0 or self.movement_seconds * self.movement_rate < 5 * self.movement_rate:
            raise InvalidSpec("movement recordings need a positive rate and at least 5 s")
        if self.voice_rate < 8000 or self.voice_seconds < 0.5:
            raise InvalidSpec("voice needs rate >= 8000 Hz and at least 0.5 s")
        if not 60 <= self.f0_range[0] <= self.f0_range[1] <= 400:
            raise InvalidSpec("f0_range must lie within [60, 400] Hz")
        if self.tap_duration <= 0:
            raise InvalidSpec("tap_duration must be > 0")
        if self.phenotypes:
            n_pd = self.counts.get("complete", {}).get("PD", 0)
            if sum(p.count for p in self.phenotypes) != n_pd:
                raise InvalidSpec(f"phenotype counts must add up to the {n_pd} complete-tier PD subjects")
            for p in self.phenotypes:
                if p.base not in GROUPS or not p.base.startswith("PD"):
                    raise InvalidSpec(f"phenotype {p.name}: base must be a PD group")
                PdMotorType(p.motor_type)
                try:
                    p.signature(self.signatures).validate(p.name)
                except TypeError as exc:
                    raise InvalidSpec(f"phenotype {p.name}: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "counts": {t: dict(sorted(c.items())) for t, c in sorted(self.counts.items())},
            "subtype_mix": dict(self.subtype_mix),
            "signatures": {k: asdict(v) for k, v in sorted(self.signatures.items())},
            "effect_scale": self.effect_scale,
            "noise": asdict(self.noise),
            "movement_rate": self.movement_rate,
            "movement_seconds": self.movement_seconds,
            "voice_rate": self.voice_rate,
            "voice_seconds": self.voice_seconds,
            "f0_range": list(self.f0_range),
            "tap_duration": self.tap_duration,
            "phenotypes": [{**asdict(p), "overrides": dict(p.overrides)} for p in self.phenotypes],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CohortSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidSpec(f"unknown spec keys {sorted(unknown)}")
        try:
            return cls(**dict(d))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, InvalidSpec):
                raise
            raise InvalidSpec(str(exc)) from None

    def effective(self, group: str) -> Signature:
        """Signature after shrinking toward the HC baseline by ``effect_scale``."""
        return _shrink(self.signatures[group], self.signatures["HC"], self.effect_scale)


def _shrink(sig: Signature, hc: Signature, scale: float) -> Signature:
    if scale == 1.0:
        return sig
    mix = lambda a, b: b + scale * (a - b)  # noqa: E731
    if scale == 0.0:
        return hc
    return Signature(
        rest_tremor_amp=mix(sig.rest_tremor_amp, hc.rest_tremor_amp),
        action_tremor_amp=mix(sig.action_tremor_amp, hc.action_tremor_amp),
        tremor_freq_range=tuple(mix(a, b) for a, b in zip(sig.tremor_freq_range, hc.tremor_freq_range)),
        jitter=mix(sig.jitter, hc.jitter),
        tap_rate=mix(sig.tap_rate, hc.tap_rate),
        tap_decay=mix(sig.tap_decay, hc.tap_decay),
        nms_prob=mix(sig.nms_prob, hc.nms_prob),
    )


def null_spec(seed: int = 0, **kw) -> CohortSpec:
    """Table-1-shaped cohort without any class signal."""
    return CohortSpec(effect_scale=0.0, seed=seed, **kw)


def phenotype_spec(seed: int = 0, n_per_phenotype: int = 5) -> CohortSpec:
    """PD-only complete cohort with two movement phenotypes, each split in two.

    Tremor vs. no tremor separates the movement view; voice jitter, tapping
    and questionnaire load split each movement group once more.
    """
    mild = {"jitter": 0.005, "tap_rate": 4.8, "tap_decay": 0.05, "nms_prob": 0.15}
    severe = {"jitter": 0.02, "tap_rate": 2.8, "tap_decay": 0.4, "nms_prob": 0.6}
    tremor = {"rest_tremor_amp": 0.4, "action_tremor_amp": 0.1}
    still = {"rest_tremor_amp": 0.0, "action_tremor_amp": 0.0}
    phen = (
        Phenotype("tremor_mild", n_per_phenotype, "T", "PD_T", {**tremor, **mild}),
        Phenotype("tremor_severe", n_per_phenotype, "ART", "PD_T", {**tremor, **severe}),
        Phenotype("still_mild", n_per_phenotype, "AR", "PD_AR", {**still, **mild}),
        Phenotype("still_severe", n_per_phenotype, "AR", "PD_AR", {**still, **severe}),
    )
    noise = NoiseSpec(
        floor_spread=0.1, amp_spread=0.05, jitter_spread=0.1, tap_rate_spread=0.05,
        orientation_spread=0.05, contralateral_ratio=1.0,
    )
    return CohortSpec(
        counts={"complete": {"PD": 4 * n_per_phenotype}},
        phenotypes=phen,
        noise=noise,
        seed=seed,
    )


# --- planning ---------------------------------------------------------------


@dataclass(frozen=True)
class PlantedSubject:
    """Everything the generator decided for one subject before making signals."""

    id: str
    index: int
    tier: str
    disease: DiseaseClass
    motor_type: PdMotorType | None
    group: str  # signature group used
    phenotype: str | None
    tremor_freq: float
    rest_amp: float
    action_amp: float
    dominant: Wrist
    noise_floor: float  # multiplier on the white-noise levels
    jitter: float
    f0: float
    tap_rate: float
    tap_decay: float
    nms_prob: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["disease"] = self.disease.value
        d["motor_type"] = self.motor_type.value if self.motor_type else None
        d["dominant"] = self.dominant.value
        return d


def _roster(spec: CohortSpec) -> list[tuple[str, DiseaseClass]]:
    out = []
    for tier in TIERS:
        for cls in DiseaseClass:
            out += [(tier, cls)] * spec.counts.get(tier, {}).get(cls.value, 0)
    return out


def subject_id(index: int) -> str:
    return f"sub-{index + 1:04d}"


def _motor_types(spec: CohortSpec, roster) -> list:
    """Motor types for PD subjects, dealt from the mix by largest remainder per tier."""
    rng = substream(spec.seed, "subtypes")
    out: list = [None] * len(roster)
    order = [PdMotorType(k) for k in spec.subtype_mix]
    for tier in TIERS:
        idx = [i for i, (t, c) in enumerate(roster) if t == tier and c is DiseaseClass.PD]
        if tier == "complete" and spec.phenotypes:
            types = [PdMotorType(p.motor_type) for p in spec.phenotypes for _ in range(p.count)]
        else:
            quota = np.array([spec.subtype_mix[t.value] for t in order]) * len(idx)
            n = np.floor(quota).astype(int)
            rem = len(idx) - n.sum()
            n[np.argsort(-(quota - n), kind="stable")[:rem]] += 1
            types = [t for t, k in zip(order, n) for _ in range(k)]
            types = [types[i] for i in rng.permutation(len(types))]
        for i, t in zip(idx, types):
            out[i] = t
    return out


def _phenotype_of(spec: CohortSpec, roster) -> list:
    out: list = [None] * len(roster)
    if not spec.phenotypes:
        return out
    idx = [i for i, (t, c) in enumerate(roster) if t == "complete" and c is DiseaseClass.PD]
    names = [p for p in spec.phenotypes for _ in range(p.count)]
    for i, p in zip(idx, names):
        out[i] = p
    return out


def plan(spec: CohortSpec) -> list[PlantedSubject]:
    roster = _roster(spec)
    types = _motor_types(spec, roster)
    phens = _phenotype_of(spec, roster)
    nz = spec.noise
    out = []
    for i, ((tier, cls), mtype, phen) in enumerate(zip(roster, types, phens)):
        rng = substream(spec.seed, "plan", i)
        if phen is not None:
            sig = _shrink(phen.signature(spec.signatures), spec.signatures["HC"], spec.effect_scale)
            group = phen.base
        else:
            if cls is DiseaseClass.PD:
                t = mtype
                if t is PdMotorType.UNKNOWN:
                    # undocumented subtype: the signal follows one of the known ones
                    t = (PdMotorType.T, PdMotorType.AR, PdMotorType.ART)[int(rng.integers(3))]
                group = f"PD_{t.value}"
            else:
                group = cls.value
            sig = spec.effective(group)
        lo, hi = sig.tremor_freq_range
        amp = float(np.exp(nz.amp_spread * rng.standard_normal()))
        out.append(
            PlantedSubject(
                id=subject_id(i),
                index=i,
                tier=tier,
                disease=cls,
                motor_type=mtype,
                group=group,
                phenotype=phen.name if phen else None,
                tremor_freq=float(rng.uniform(lo, hi)),
                rest_amp=sig.rest_tremor_amp * amp,
                action_amp=sig.action_tremor_amp * amp,
                dominant=Wrist.LEFT if rng.random() < 0.5 else Wrist.RIGHT,
                noise_floor=float(np.exp(nz.floor_spread * rng.standard_normal())),
                jitter=float(sig.jitter * np.exp(nz.jitter_spread * rng.standard_normal())),
                f0=float(rng.uniform(*spec.f0_range)),
                tap_rate=float(sig.tap_rate * np.exp(nz.tap_rate_spread * rng.standard_normal())),
                tap_decay=sig.tap_decay,
                nms_prob=sig.nms_prob,
            )
        )
    return out


def ground_truth(spec: CohortSpec, subject: str) -> PlantedSubject:
    """Planted attributes (subtype, tremor frequency, jitter level, ...) of one subject."""
    roster = _roster(spec)
    try:
        index = int(subject.split("-")[1]) - 1
    except (IndexError, ValueError):
        raise UnknownSubject(f"unknown subject {subject!r}") from None
    if not 0 <= index < len(roster) or subject_id(index) != subject:
        raise UnknownSubject(f"unknown subject {subject!r}")
    return plan(spec)[index]


# --- signals ----------------------------------------------------------------


@dataclass(frozen=True)
class VoiceContour:
    """Programmed period contour: constant within blocks of ``block`` seconds."""

    periods: np.ndarray
    block: float

    def at(self, times) -> np.ndarray:
        idx = np.minimum((np.asarray(times) // self.block).astype(int), self.periods.size - 1)
        return self.periods[idx]


def voiced_signal(
    rng: np.random.Generator,
    rate: float,
    seconds: float,
    f0: float,
    jitter: float,
    block: float = 0.05,
    hop: float = 0.01,
    harmonics: int = 5,
    noise_sd: float = 0.0,
) -> tuple[np.ndarray, VoiceContour]:
    """Harmonic pulse train whose period alternates around ``1/f0``.

    Frames ``hop`` apart see a period change only at block boundaries, one
    frame pair in ``block/hop``; the swing is sized so the frame-to-frame
    local jitter averages ``jitter``.
    """
    T0 = 1.0 / f0
    per_block = block / hop
    n_blocks = int(np.ceil(seconds / block)) + 1
    swing = jitter * per_block / 2.0 * rng.uniform(0.5, 1.5, n_blocks)
    sign = np.where(np.arange(n_blocks) % 2 == 0, 1.0, -1.0)
    periods = T0 * (1.0 + sign * swing)
    n = int(round(seconds * rate))
    t = np.arange(n) / rate
    phase = np.cumsum(1.0 / periods[np.minimum((t // block).astype(int), n_blocks - 1)]) / rate
    phase += rng.uniform(0, 1)
    x = sum(np.sin(2 * np.pi * k * phase) / k for k in range(1, harmonics + 1))
    x = 0.5 * x / np.max(np.abs(x))
    if noise_sd > 0:
        x = x + noise_sd * rng.standard_normal(n)
    return np.clip(x, -1.0, 1.0), VoiceContour(periods, block)


# dominant tremor axes in the watch frame (pronation/supination shows up as
# rotation about the forearm axis)
ACCEL_AXIS = {Wrist.LEFT: np.array([0.5, 0.7, 0.5]), Wrist.RIGHT: np.array([0.5, -0.7, 0.5])}
GYRO_AXIS = np.array([0.7, 0.45, 0.55])


def _unit(rng, centre=None, spread: float = 1.0) -> np.ndarray:
    v = rng.standard_normal(3) * (spread if centre is not None else 1.0)
    if centre is not None:
        v = v + centre / np.linalg.norm(centre)
    return v / np.linalg.norm(v)


def _movement(spec: CohortSpec, p: PlantedSubject, rng) -> tuple[MovementRecord, ...]:
    nz = spec.noise
    n = int(round(spec.movement_seconds * spec.movement_rate))
    t = np.arange(n) / spec.movement_rate
    out = []
    for task, wrist in MOVEMENT_SLOTS:
        amp = p.rest_amp if task is MovementTask.RELAXED else p.action_amp
        if p.disease is DiseaseClass.PD and wrist is not p.dominant:
            amp *= nz.contralateral_ratio  # PD tremor is usually asymmetric
        f = p.tremor_freq
        wave = np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
        gravity = GRAVITY * _unit(rng)
        accel_axis = _unit(rng, ACCEL_AXIS[wrist], nz.orientation_spread)
        gyro_axis = _unit(rng, GYRO_AXIS, nz.orientation_spread)
        accel = gravity[:, None] + amp * accel_axis[:, None] * wave
        gyro = nz.gyro_per_accel * amp * gyro_axis[:, None] * np.cos(2 * np.pi * f * t)
        accel = accel + nz.accel_sd * p.noise_floor * rng.standard_normal((3, n))
        gyro = gyro + nz.gyro_sd * p.noise_floor * rng.standard_normal((3, n))
        out.append(MovementRecord(task, wrist, spec.movement_rate, np.round(accel, 6), np.round(gyro, 6)))
    return tuple(out)


def _voice(spec: CohortSpec, p: PlantedSubject, rng) -> tuple[VoiceRecord, ...]:
    out = []
    for task in VoiceTask:
        x, _ = voiced_signal(
            rng, spec.voice_rate, spec.voice_seconds, p.f0 * rng.uniform(0.97, 1.03), p.jitter,
            noise_sd=spec.noise.voice_noise_sd,
        )
        out.append(VoiceRecord(task, spec.voice_rate, np.round(x, 6)))
    return tuple(out)


def _taps(spec: CohortSpec, p: PlantedSubject, rng) -> TapRecord:
    nz = spec.noise
    dur = spec.tap_duration
    targets = np.array([[360.0 - 100.0, 900.0], [360.0 + 100.0, 900.0]])
    times = []
    t = float(rng.uniform(0.05, 0.3))
    while t < dur:
        times.append(t)
        rate = p.tap_rate * (1.0 - p.tap_decay * t / dur)
        step = (1.0 / rate) * (1.0 + nz.tap_interval_cv * rng.standard_normal())
        t += max(step, 0.03)
    times = np.round(np.array(times), 4)
    times = times[times < dur]
    k = np.arange(times.size)
    pos = targets[k % 2] + nz.tap_position_sd * rng.standard_normal((times.size, 2))
    return TapRecord(np.column_stack([times, np.round(pos, 2)]), dur)


def _questionnaire(spec: CohortSpec, p: PlantedSubject, rng) -> QuestionnaireRecord:
    weights = substream(spec.seed, "nms_items").uniform(
        1 - spec.noise.nms_item_spread, 1 + spec.noise.nms_item_spread, N_NMS_ITEMS
    )
    probs = np.clip(p.nms_prob * weights, 0.0, 1.0)
    return QuestionnaireRecord(tuple(bool(b) for b in rng.random(N_NMS_ITEMS) < probs))


def generate_subject(spec: CohortSpec, p: PlantedSubject) -> SubjectRecord:
    rng = substream(spec.seed, "signal", p.index)
    quest = _questionnaire(spec, p, rng)
    movement = _movement(spec, p, rng)
    voice: tuple = ()
    taps = None
    if p.tier == "complete":
        voice = _voice(spec, p, rng)
        taps = _taps(spec, p, rng)
    return SubjectRecord(p.id, p.disease, p.motor_type, quest, movement, voice, taps)


def generate(spec: CohortSpec) -> Cohort:
    """Deterministic cohort for ``spec`` (including its seed)."""
    subjects = tuple(generate_subject(spec, p) for p in plan(spec))
    # JSON-normalised so the in-memory metadata equals what a cohort directory reads back
    spec_doc = json.loads(json.dumps(spec.to_dict()))
    return Cohort(subjects, seed=spec.seed, metadata={"generator": "synthcohort", "spec": spec_doc})
