"""Render mono sources into multichannel room audio."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import resample

from .audio import AudioClip
from .errors import FormatError, RangeError, SeldscapeError
from .geometry import MicArray, RoomSpec, Trajectory, Vec3
from .rir import Rir, RirDatabase, nearest_rir, synth_foa_rir, synth_rir

DEFAULT_HOP = 0.1
ACTIVE_THRESHOLD_DB = -60.0
PV_WINDOW = 2048
PV_HOP = 512


class DegenerateSignalError(SeldscapeError, ValueError):
    """Signal has no energy where a level is required."""


def _next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def ola_convolve(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Full linear convolution of a 1-D signal with each row of ``h`` by FFT overlap-add.

    Block FFT size is the power of two at or above four times the filter length.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    h = np.atleast_2d(np.asarray(h, dtype=float))
    n, m = len(x), h.shape[1]
    out = np.zeros((h.shape[0], max(n + m - 1, 0)))
    if n == 0 or m == 0:
        return out
    nfft = _next_pow2(4 * m)
    block = nfft - m + 1
    if n < block:
        # a single block; shrink the transform when the signal is short
        nfft = _next_pow2(n + m - 1)
        block = n
    H = np.fft.rfft(h, nfft, axis=1)
    for start in range(0, n, block):
        seg = x[start : start + block]
        y = np.fft.irfft(np.fft.rfft(seg, nfft)[None, :] * H, nfft, axis=1)
        stop = min(start + len(seg) + m - 1, out.shape[1])
        out[:, start:stop] += y[:, : stop - start]
    return out


def convolve(signal: AudioClip, rir) -> AudioClip:
    """Convolve a mono clip with every channel of an impulse response."""
    taps = rir.taps if isinstance(rir, Rir) else rir.samples
    if signal.sample_rate != rir.sample_rate:
        raise FormatError(f"sample rate mismatch: signal {signal.sample_rate} Hz, RIR {rir.sample_rate} Hz")
    if signal.channels != 1:
        raise FormatError(f"convolve expects a mono signal, got {signal.channels} channels")
    return AudioClip(ola_convolve(signal.samples[0], taps), signal.sample_rate)


# ---------------------------------------------------------------------------
# RIR sources for moving-source rendering


@dataclass(frozen=True)
class VirtualRoom:
    """A simulated room seen through a microphone array, rendered as FOA or capsule signals."""

    room: RoomSpec
    array: MicArray
    format: str = "foa"
    sample_rate: int = 24000
    max_order: int | None = None

    def __post_init__(self):
        if self.format not in ("foa", "mic"):
            raise ValueError(f"format must be 'foa' or 'mic', got {self.format!r}")
        self.array.check_inside(self.room)

    @property
    def mic_center(self) -> Vec3:
        return self.array.center

    @property
    def channels(self) -> int:
        return 4 if self.format == "foa" else self.array.n_capsules

    def rir_at(self, pos):
        p = Vec3.of(pos)
        return _cached_rir(self, p), p


@lru_cache(maxsize=512)
def _cached_rir(vroom: VirtualRoom, pos: Vec3) -> Rir:
    if vroom.format == "foa":
        return synth_foa_rir(vroom.room, pos, vroom.array.center, vroom.sample_rate, vroom.max_order)
    return synth_rir(vroom.room, pos, vroom.array, vroom.sample_rate, vroom.max_order)


def rir_at(source, pos):
    """Impulse response for ``pos`` and the effective position it was measured or synthesised at."""
    if isinstance(source, RirDatabase):
        return nearest_rir(source, pos)
    return source.rir_at(pos)


def crossfade_windows(n: int, hop_n: int, xf: int):
    """Per-segment gain windows of length ``n`` summing to one everywhere.

    Returns a list of ``(start, window)``. Adjacent segments overlap by ``xf``
    samples centred on each hop boundary, with linear ramps.
    """
    k_count = max(1, math.ceil(n / hop_n))
    ramp = (np.arange(xf) + 0.5) / xf if xf > 0 else np.zeros(0)
    half = xf // 2
    out = []
    for k in range(k_count):
        lo = k * hop_n - (half if k > 0 else 0)
        hi = (k + 1) * hop_n + (xf - half if k < k_count - 1 else 0)
        lo, hi = max(lo, 0), min(hi, n)
        w = np.ones(hi - lo)
        if k > 0 and xf > 0:
            b = k * hop_n - half - lo
            seg = slice(max(b, 0), max(b + xf, 0))
            w[seg] = ramp[max(-b, 0) : max(-b, 0) + len(w[seg])]
        if k < k_count - 1 and xf > 0:
            b = (k + 1) * hop_n - half - lo
            seg = slice(b, min(b + xf, len(w)))
            w[seg] = 1.0 - ramp[: len(w[seg])]
        out.append((lo, w))
    return out


def render_moving(signal: AudioClip, traj: Trajectory, rir_source, hop: float = DEFAULT_HOP):
    """Spatialise a mono signal along a trajectory.

    The signal is cut into ``hop``-long segments, each convolved with the RIR
    at the trajectory position sampled at the segment centre and cross-faded
    into its neighbours over half a hop. Consecutive segments sharing an
    effective position are convolved together.

    Returns ``(clip, [(segment_start_time, effective_position), ...])``.
    """
    if hop <= 0:
        raise RangeError("hop must be positive")
    if signal.channels != 1:
        raise FormatError("render_moving expects a mono signal")
    sr = signal.sample_rate
    if abs(traj.duration - signal.duration) > 1.0 / sr + 1e-9:
        raise RangeError(f"trajectory lasts {traj.duration} s but the signal {signal.duration} s")
    n = signal.length
    hop_n = max(1, int(round(hop * sr)))
    windows = crossfade_windows(n, hop_n, hop_n // 2)

    positions = []
    for k in range(len(windows)):
        t = min((k + 0.5) * hop_n / sr, traj.duration)
        rir, eff = rir_at(rir_source, traj.sample(t))
        if rir.sample_rate != sr:
            raise FormatError(f"RIR sample rate {rir.sample_rate} != signal {sr}")
        positions.append((k * hop_n / sr, eff, rir))

    # merge runs of identical effective positions into one window
    groups = []
    for k, (lo, w) in enumerate(windows):
        eff, rir = positions[k][1], positions[k][2]
        if groups and groups[-1][0] == eff:
            g = groups[-1]
            new_hi = max(g[1] + len(g[2]), lo + len(w))
            merged = np.zeros(new_hi - g[1])
            merged[: len(g[2])] += g[2]
            merged[lo - g[1] : lo - g[1] + len(w)] += w
            groups[-1] = (eff, g[1], merged, rir)
        else:
            groups.append((eff, lo, w, rir))

    length = n + max(g[3].length for g in groups) - 1
    out = np.zeros((groups[0][3].channels, length))
    x = signal.samples[0]
    for _, lo, w, rir in groups:
        y = ola_convolve(x[lo : lo + len(w)] * w, rir.taps)
        out[:, lo : lo + y.shape[1]] += y
    return AudioClip(out, sr), [(t, eff) for t, eff, _ in positions]


# ---------------------------------------------------------------------------
# levels


def active_extent(clip: AudioClip, threshold_db: float = ACTIVE_THRESHOLD_DB):
    """Sample span between the first and last sample within ``threshold_db`` of the peak."""
    env = np.max(np.abs(clip.samples), axis=0) if clip.length else np.zeros(0)
    peak = env.max() if len(env) else 0.0
    if peak == 0:
        return None
    idx = np.flatnonzero(env >= peak * 10 ** (threshold_db / 20))
    return int(idx[0]), int(idx[-1]) + 1


def rms_db(clip: AudioClip, active: bool = True) -> float:
    """Level in dBFS: power averaged over channels, over the active extent by default."""
    if active:
        span = active_extent(clip)
        if span is None:
            return -math.inf
        x = clip.samples[:, span[0] : span[1]]
    else:
        x = clip.samples
    p = float(np.mean(x**2)) if x.size else 0.0
    return 10 * math.log10(p) if p > 0 else -math.inf


def scale_to_snr(event: AudioClip, reference_rms_db: float, snr_db: float) -> AudioClip:
    level = rms_db(event)
    if not math.isfinite(level):
        raise DegenerateSignalError("cannot scale a silent event")
    gain = 10 ** ((reference_rms_db + snr_db - level) / 20)
    return event.with_samples(event.samples * gain)


def normalize_peak(clip: AudioClip, target_db: float = -1.0):
    """Scale down to ``target_db`` peak only if the clip would clip; returns (clip, gain)."""
    peak = float(np.max(np.abs(clip.samples))) if clip.length else 0.0
    if peak <= 1.0:
        return clip, 1.0
    gain = 10 ** (target_db / 20) / peak
    return clip.with_samples(clip.samples * gain), gain


# ---------------------------------------------------------------------------
# effects


def _hann(n):
    return 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)


def _stft(x, n_fft=PV_WINDOW, hop=PV_HOP):
    pad = n_fft // 2
    xp = np.pad(x, (pad, pad + n_fft))
    n_frames = 1 + (len(xp) - n_fft) // hop
    idx = np.arange(n_fft)[None, :] + hop * np.arange(n_frames)[:, None]
    return np.fft.rfft(xp[idx] * _hann(n_fft), axis=1).T      # (bins, frames)


def _istft(D, length, n_fft=PV_WINDOW, hop=PV_HOP):
    win = _hann(n_fft)
    frames = np.fft.irfft(D.T, n_fft, axis=1) * win
    total = n_fft + hop * (frames.shape[0] - 1)
    y = np.zeros(total)
    wsum = np.zeros(total)
    for i, fr in enumerate(frames):
        y[i * hop : i * hop + n_fft] += fr
        wsum[i * hop : i * hop + n_fft] += win**2
    y = np.divide(y, wsum, out=np.zeros_like(y), where=wsum > 1e-8)
    pad = n_fft // 2
    y = y[pad : pad + length]
    return np.pad(y, (0, length - len(y)))


def _phase_vocoder(x, factor):
    """Stretch ``x`` by ``factor`` in time keeping its pitch."""
    D = _stft(x)
    rate = 1.0 / factor
    steps = np.arange(0, D.shape[1], rate)
    omega = 2 * np.pi * PV_HOP * np.arange(D.shape[0]) / PV_WINDOW
    phase = np.angle(D[:, 0])
    out = np.empty((D.shape[0], len(steps)), dtype=complex)
    Dp = np.concatenate([D, np.zeros((D.shape[0], 1))], axis=1)
    for i, s in enumerate(steps):
        k = int(s)
        a = s - k
        mag = (1 - a) * np.abs(Dp[:, k]) + a * np.abs(Dp[:, k + 1])
        out[:, i] = mag * np.exp(1j * phase)
        dphi = np.angle(Dp[:, k + 1]) - np.angle(Dp[:, k]) - omega
        dphi -= 2 * np.pi * np.round(dphi / (2 * np.pi))
        phase = phase + omega + dphi
    return _istft(out, int(round(len(x) * factor)))


def time_stretch(signal: AudioClip, factor: float) -> AudioClip:
    """Change duration by ``factor`` (0.5..2) without changing pitch."""
    if not 0.5 <= factor <= 2.0:
        raise RangeError(f"time-stretch factor {factor} outside [0.5, 2]")
    if signal.channels != 1:
        raise FormatError("time_stretch expects a mono signal")
    return signal.with_samples(_phase_vocoder(signal.samples[0], factor))


def pitch_shift(signal: AudioClip, semitones: float) -> AudioClip:
    """Shift pitch by ``semitones`` (|s| <= 12), keeping the duration."""
    if abs(semitones) > 12:
        raise RangeError(f"pitch shift of {semitones} semitones outside [-12, 12]")
    if signal.channels != 1:
        raise FormatError("pitch_shift expects a mono signal")
    ratio = 2 ** (semitones / 12)
    x = signal.samples[0]
    stretched = _phase_vocoder(x, ratio)
    return signal.with_samples(resample(stretched, len(x)) if len(x) else stretched)


# ---------------------------------------------------------------------------
# mixing


def mix(tracks, duration: float, sample_rate: int | None = None, channels: int | None = None) -> AudioClip:
    """Sum ``(clip, onset_seconds)`` tracks into a buffer of ``duration`` seconds; no normalisation."""
    tracks = list(tracks)
    if tracks:
        sample_rate = sample_rate or tracks[0][0].sample_rate
        channels = channels or tracks[0][0].channels
    if sample_rate is None or channels is None:
        raise FormatError("mixing no tracks requires sample_rate and channels")
    n = int(round(duration * sample_rate))
    out = np.zeros((channels, n))
    for clip, onset in tracks:
        if clip.sample_rate != sample_rate or clip.channels != channels:
            raise FormatError(
                f"track format {clip.channels} ch @ {clip.sample_rate} Hz != mix {channels} ch @ {sample_rate} Hz"
            )
        start = int(round(onset * sample_rate))
        if start >= n:
            continue
        if start < 0:
            raise RangeError(f"negative onset {onset}")
        m = min(clip.length, n - start)
        out[:, start : start + m] += clip.samples[:, :m]
    return AudioClip(out, sample_rate)
