"""Signal kernels: Welch PSD, integer-centred band powers, autocorrelation
pitch tracking with local jitter, and finger-tap segment statistics.

All functions are pure and operate on numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .datamodel import TapRecord
from .errors import (
    InvalidParams,
    NoVoicedFrames,
    ResolutionTooCoarse,
    SignalTooShort,
    TooFewPeriods,
)

REFERENCE_RATE = 50.0
BAND_CENTERS = tuple(range(2, 13))


@dataclass(frozen=True)
class WelchParams:
    segment_len: int = 128
    overlap: float = 0.5
    window: str = "hann"  # hann | hamming | rect
    detrend: str = "mean"  # mean | none

    def __post_init__(self) -> None:
        if self.segment_len < 16:
            raise InvalidParams(f"segment_len must be >= 16, got {self.segment_len}")
        if not 0.0 <= self.overlap < 1.0:
            raise InvalidParams(f"overlap must be in [0, 1), got {self.overlap}")
        if self.window not in ("hann", "hamming", "rect"):
            raise InvalidParams(f"unknown window {self.window!r}")
        if self.detrend not in ("mean", "none"):
            raise InvalidParams(f"unknown detrend {self.detrend!r}")


@dataclass(frozen=True, eq=False)
class Spectrum:
    freqs: np.ndarray
    psd: np.ndarray

    @property
    def resolution(self) -> float:
        return float(self.freqs[1] - self.freqs[0])


def _window(kind: str, n: int) -> np.ndarray:
    # periodic (DFT-even) windows
    k = np.arange(n)
    if kind == "hann":
        return 0.5 - 0.5 * np.cos(2 * np.pi * k / n)
    if kind == "hamming":
        return 0.54 - 0.46 * np.cos(2 * np.pi * k / n)
    return np.ones(n)


def welch_psd(signal, sample_rate: float, params: WelchParams = WelchParams()) -> Spectrum:
    """One-sided Welch PSD estimate in unit^2/Hz.

    Segments are detrended individually, windowed, and their periodograms
    averaged. Scaling is such that ``psd.sum() * resolution`` equals the mean
    square of the detrended, window-normalised segments.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise InvalidParams("welch_psd expects a 1-D signal")
    if not sample_rate > 0:
        raise InvalidParams(f"sample_rate must be > 0, got {sample_rate}")
    if not np.all(np.isfinite(x)):
        raise InvalidParams("signal contains NaN or Inf")
    n = params.segment_len
    if x.size < n:
        raise SignalTooShort(f"signal of {x.size} samples shorter than segment_len {n}")

    step = n - int(params.overlap * n)
    segments = sliding_window_view(x, n)[::step]
    if params.detrend == "mean":
        segments = segments - segments.mean(axis=1, keepdims=True)
    win = _window(params.window, n)
    spec = np.fft.rfft(segments * win, axis=1)
    power = (spec.real**2 + spec.imag**2).mean(axis=0)
    psd = power / (sample_rate * np.sum(win**2))
    # fold negative frequencies; DC and (even-length) Nyquist are not doubled
    if n % 2 == 0:
        psd[1:-1] *= 2.0
    else:
        psd[1:] *= 2.0
    freqs = np.arange(psd.size) * (sample_rate / n)
    return Spectrum(freqs=freqs, psd=psd)


def band_powers(spec: Spectrum, centers=BAND_CENTERS, width: float = 1.0) -> np.ndarray:
    """Integrate the PSD over ``[c - width/2, c + width/2)`` for each centre.

    Each PSD bin is treated as constant over its cell
    ``[f - df/2, f + df/2)``; partial overlaps with a band are weighted by the
    overlap length, so a flat PSD of level ``c`` integrates to ``c * width``.
    """
    df = spec.resolution
    if df > width / 2:
        raise ResolutionTooCoarse(f"resolution {df:.3f} Hz too coarse for {width} Hz bands")
    centers = np.asarray(centers, dtype=float)
    lo = centers - width / 2
    hi = centers + width / 2
    nyquist_edge = spec.freqs[-1] + df / 2
    if hi.max() > nyquist_edge + 1e-9:
        raise InvalidParams(f"band edge {hi.max()} Hz beyond spectrum limit {nyquist_edge} Hz")
    cell_lo = np.maximum(spec.freqs - df / 2, 0.0)
    cell_hi = spec.freqs + df / 2
    overlap = np.clip(
        np.minimum(hi[:, None], cell_hi[None, :]) - np.maximum(lo[:, None], cell_lo[None, :]),
        0.0,
        None,
    )
    return (overlap * spec.psd).sum(axis=1)


def resample_linear(x, rate: float, target_rate: float = REFERENCE_RATE) -> np.ndarray:
    """Linear-interpolation resampling onto a uniform grid at ``target_rate``."""
    x = np.asarray(x, dtype=float)
    if rate == target_rate:
        return x
    duration = (x.shape[-1] - 1) / rate
    t_old = np.arange(x.shape[-1]) / rate
    t_new = np.arange(int(np.floor(duration * target_rate)) + 1) / target_rate
    if x.ndim == 1:
        return np.interp(t_new, t_old, x)
    return np.stack([np.interp(t_new, t_old, row) for row in x])


@dataclass(frozen=True, eq=False)
class PitchTrack:
    periods: np.ndarray  # seconds, voiced frames only
    times: np.ndarray  # frame centres (s) of the voiced frames
    frame_hop: float
    n_frames: int = 0


def pitch_track(
    voice,
    sample_rate: float,
    min_f0: float = 60.0,
    max_f0: float = 400.0,
    frame_len: float = 0.04,
    hop: float = 0.01,
    voicing_threshold: float = 0.45,
    octave_tolerance: float = 0.9,
) -> PitchTrack:
    """Frame-wise pitch periods from the normalised autocorrelation.

    For each frame the autocorrelation at lag L is normalised by the energies
    of the two overlapping sub-frames. Frames whose best value falls below
    ``voicing_threshold`` are unvoiced. Among local maxima reaching
    ``octave_tolerance`` times the frame's best value the shortest lag wins,
    which suppresses period-doubling picks; the peak is then refined by
    parabolic interpolation.
    """
    x = np.asarray(voice, dtype=float)
    if not (0 < min_f0 < max_f0):
        raise InvalidParams("need 0 < min_f0 < max_f0")
    n = int(round(frame_len * sample_rate))
    step = max(1, int(round(hop * sample_rate)))
    if x.size < 2 * n:
        raise SignalTooShort(f"voice shorter than two frames ({x.size} < {2 * n} samples)")
    min_lag = max(1, int(np.floor(sample_rate / max_f0)))
    max_lag = int(np.ceil(sample_rate / min_f0))
    if max_lag + 2 >= n:
        raise InvalidParams("frame_len too short for the lowest f0")

    frames = sliding_window_view(x, n)[::step]
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(frames, nfft, axis=1)
    acf = np.fft.irfft(spec.real**2 + spec.imag**2, nfft, axis=1)
    lags = np.arange(min_lag - 1, max_lag + 2)
    csum = np.cumsum(frames**2, axis=1)
    head = csum[:, n - 1 - lags]  # energy of x[0 : n-L]
    csum0 = np.concatenate([np.zeros((frames.shape[0], 1)), csum], axis=1)
    tail = csum[:, -1:] - csum0[:, lags]  # energy of x[L : n]
    denom = np.sqrt(head * tail)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > 0, acf[:, lags] / denom, 0.0)

    inner = r[:, 1:-1]
    best = inner.max(axis=1)
    is_peak = (inner >= r[:, :-2]) & (inner >= r[:, 2:]) & (inner >= octave_tolerance * best[:, None])
    voiced = np.flatnonzero(best >= voicing_threshold)
    periods = []
    for f in voiced:
        cands = np.flatnonzero(is_peak[f])
        k = (cands[0] if cands.size else int(np.argmax(inner[f]))) + 1
        y0, y1, y2 = r[f, k - 1], r[f, k], r[f, k + 1]
        curv = y0 - 2 * y1 + y2
        delta = 0.5 * (y0 - y2) / curv if curv < 0 else 0.0
        periods.append((lags[k] + float(np.clip(delta, -1.0, 1.0))) / sample_rate)
    periods = np.clip(np.array(periods), 1.0 / max_f0, 1.0 / min_f0)
    if periods.size < 3:
        raise NoVoicedFrames(f"only {periods.size} voiced frames (need 3)")
    times = voiced * (step / sample_rate) + n / (2 * sample_rate)
    return PitchTrack(periods=periods, times=times, frame_hop=step / sample_rate, n_frames=len(frames))


def local_jitter(track) -> float:
    """Mean absolute difference of consecutive periods over the mean period."""
    periods = np.asarray(track.periods if isinstance(track, PitchTrack) else track, dtype=float)
    if periods.size < 3:
        raise TooFewPeriods(f"need >= 3 periods, got {periods.size}")
    return float(np.mean(np.abs(np.diff(periods))) / np.mean(periods))


@dataclass(frozen=True)
class TapSegment:
    count: int
    avg_speed: float


def tap_segment_stats(taps: TapRecord, n_segments: int = 3, speed: str = "spatial") -> list[TapSegment]:
    """Per-segment touch count and average speed.

    ``speed="spatial"`` gives the mean px/s between consecutive touches that
    both fall inside the segment; ``speed="rate"`` gives touches per second.
    """
    if speed not in ("spatial", "rate"):
        raise InvalidParams(f"unknown speed mode {speed!r}")
    seg_len = taps.duration / n_segments
    ev = taps.events
    seg_idx = np.floor(ev[:, 0] / seg_len).astype(int) if ev.size else np.zeros(0, int)
    out = []
    for k in range(n_segments):
        e = ev[seg_idx == k]
        if speed == "rate":
            avg = len(e) / seg_len
        elif len(e) < 2:
            avg = 0.0
        else:
            dist = np.hypot(np.diff(e[:, 1]), np.diff(e[:, 2]))
            avg = float(np.mean(dist / np.diff(e[:, 0])))
        out.append(TapSegment(count=int(len(e)), avg_speed=float(avg)))
    return out
