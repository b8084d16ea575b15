"""Label-consistent augmentations for existing FOA SELD recordings.

Four transforms are provided: the 16 channel-swap patterns (90-degree
rotations and reflections of the sound field), arbitrary yaw rotation,
time-frequency masking shared across channels, and pairwise remixing.
"""

from __future__ import annotations

import logging
import math
import zlib
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.signal import stft

from . import io as sio
from .annotations import AnnotationFrame, polyphony, sort_frames
from .audio import AudioClip
from .errors import FormatError, PolyphonyError, RangeError
from .geometry import wrap_azimuth

log = logging.getLogger(__name__)

MASK_WINDOW = 1024
MASK_HOP = 512
MAX_POLYPHONY = 5

SUFFIXES = {
    "channel-swap": "swapped",
    "rotate": "rotated",
    "tf-mask": "tfmasked",
    "remix": "remixed",
}
AUG_ALIASES = {
    "channel swapping": "channel-swap",
    "channel_swap": "channel-swap",
    "swap": "channel-swap",
    "rotation": "rotate",
    "soundscape rotation": "rotate",
    "time freq mask": "tf-mask",
    "tf_mask": "tf-mask",
    "time-domain remixing": "remix",
}

# (sign, offset) for az -> sign*az + offset, in the order used for pattern indices
_AZ_MAPS = [(1, 0), (1, 90), (1, 180), (1, -90), (-1, 0), (-1, 90), (-1, 180), (-1, -90)]
_EL_MAPS = [1, -1]


@dataclass(frozen=True)
class SwapPattern:
    """One of 16 signed FOA channel permutations.

    Index ``k = 8 * el_index + az_index``; ``k = 0`` is the identity.
    """

    index: int

    def __post_init__(self):
        if not 0 <= self.index < 16:
            raise RangeError(f"swap pattern index {self.index} outside 0..15")

    @property
    def az_sign(self) -> int:
        return _AZ_MAPS[self.index % 8][0]

    @property
    def az_offset(self) -> int:
        return _AZ_MAPS[self.index % 8][1]

    @property
    def el_sign(self) -> int:
        return _EL_MAPS[self.index // 8]

    def map_angles(self, azimuth, elevation):
        az = wrap_azimuth(self.az_sign * np.asarray(azimuth, dtype=float) + self.az_offset)
        return az, self.el_sign * elevation

    def matrix(self) -> np.ndarray:
        """4x4 signed permutation acting on (W, Y, Z, X) channel vectors."""
        return _pattern_matrix(self.index)

    def describe(self) -> str:
        s = "az" if self.az_sign > 0 else "-az"
        if self.az_offset:
            s += f"{self.az_offset:+d}"
        return f"az->{s}, el->{'el' if self.el_sign > 0 else '-el'}"


@lru_cache(maxsize=None)
def _pattern_matrix(k: int) -> np.ndarray:
    s, off = _AZ_MAPS[k % 8]
    e = _EL_MAPS[k // 8]
    c, d = int(round(math.cos(math.radians(off)))), int(round(math.sin(math.radians(off))))
    # cos(s*az + off) = c*cos(az) - s*d*sin(az); sin(s*az + off) = d*cos(az) + s*c*sin(az)
    M = np.zeros((4, 4))
    M[0, 0] = 1
    M[1, 3], M[1, 1] = d, s * c          # Y' from X, Y
    M[2, 2] = e                          # Z'
    M[3, 3], M[3, 1] = c, -s * d         # X' from X, Y
    M.setflags(write=False)
    return M


def all_patterns():
    return [SwapPattern(k) for k in range(16)]


def compose(p: SwapPattern, q: SwapPattern) -> SwapPattern:
    """Pattern equivalent to applying ``q`` then ``p``."""
    M = p.matrix() @ q.matrix()
    for r in all_patterns():
        if np.array_equal(r.matrix(), M):
            return r
    raise AssertionError("swap patterns are not closed under composition")


def inverse(p: SwapPattern) -> SwapPattern:
    for r in all_patterns():
        if compose(r, p).index == 0:
            return r
    raise AssertionError(f"pattern {p.index} has no inverse")


def _check_foa(clip: AudioClip):
    if clip.channels != 4:
        raise FormatError(f"expected 4-channel FOA audio, got {clip.channels} channels")


def _map_labels(labels, fn):
    out = []
    for fr in labels:
        az, el = fn(fr.azimuth, fr.elevation)
        az = int(round(az))
        if az >= 180:
            az -= 360
        out.append(fr._replace(azimuth=az, elevation=int(round(el))))
    return out


def channel_swap(foa: AudioClip, labels, pattern: SwapPattern):
    _check_foa(foa)
    if isinstance(pattern, int):
        pattern = SwapPattern(pattern)
    audio = foa.with_samples(pattern.matrix() @ foa.samples)
    return audio, _map_labels(labels, pattern.map_angles)


def rotation_matrix(yaw: float) -> np.ndarray:
    a = math.radians(yaw)
    c, s = math.cos(a), math.sin(a)
    M = np.eye(4)
    # Y' = s*X + c*Y ; X' = c*X - s*Y
    M[1, 1], M[1, 3] = c, s
    M[3, 3], M[3, 1] = c, -s
    return M


def rotate_soundscape(foa: AudioClip, labels, yaw: float):
    """Rotate the sound field by ``yaw`` degrees about the vertical axis."""
    _check_foa(foa)
    audio = foa.with_samples(rotation_matrix(yaw) @ foa.samples)
    return audio, _map_labels(labels, lambda az, el: (wrap_azimuth(az + yaw), el))


# ---------------------------------------------------------------------------
# time-frequency masking


def _stft(clip: AudioClip):
    return stft(clip.samples, fs=clip.sample_rate, window="hann", nperseg=MASK_WINDOW,
                noverlap=MASK_WINDOW - MASK_HOP, boundary="zeros", padded=True)


# Masked bins are realized with a margin so that re-analysis on the same STFT grid
# (and on any finer grid) sees the mask: one bin of dilation plus a two-bin
# raised-cosine ramp in frequency, the full window support in time.
_FREQ_DILATE = 1
_FREQ_RAMP = 2
_TIME_RAMP = 256


def _ramp_gain(dist, width):
    """0 for dist <= 0, raised-cosine rise to 1 at dist >= width."""
    d = np.clip(dist / width, 0.0, 1.0)
    return 0.5 - 0.5 * np.cos(np.pi * d)


def _band_stop(samples, sample_rate, bin_ranges):
    if not bin_ranges:
        return samples
    n = samples.shape[1]
    nfft = n + 4 * MASK_WINDOW
    df = sample_rate / MASK_WINDOW
    fr = np.fft.rfftfreq(nfft, 1 / sample_rate) / df
    gain = np.ones_like(fr)
    for k0, k1 in bin_ranges:
        dist = np.maximum((k0 - _FREQ_DILATE) - fr, fr - (k1 + _FREQ_DILATE))
        gain *= _ramp_gain(dist, _FREQ_RAMP)
    spec = np.fft.rfft(samples, nfft, axis=1) * gain
    return np.fft.irfft(spec, nfft, axis=1)[:, :n]


def _time_gate(samples, frame_ranges):
    if not frame_ranges:
        return samples
    n = np.arange(samples.shape[1])
    env = np.ones(samples.shape[1])
    half = MASK_WINDOW / 2
    for j0, j1 in frame_ranges:
        dist = np.maximum((j0 * MASK_HOP - half) - n, n - (j1 * MASK_HOP + half))
        env *= _ramp_gain(dist, _TIME_RAMP)
    return samples * env


def _runs(flags):
    idx = np.flatnonzero(flags)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.r_[idx[0], idx[breaks + 1]]
    ends = np.r_[idx[breaks], idx[-1]]
    return list(zip(starts.tolist(), ends.tolist()))


def apply_tf_masks(clip: AudioClip, time_spans=(), freq_bands=(), return_stft: bool = False):
    """Zero the given time spans (seconds) and frequency bands (Hz) in every channel.

    A bin is masked when its frame centre time or bin frequency falls inside a span.
    Masked frequency bins are removed with a zero-phase band-stop gain and masked
    frames with a time gate covering their window support, so that the result has
    no energy left in the masked bins when analysed again. With ``return_stft`` the
    input STFT, its masked copy and the mask are returned as well.
    """
    f, t, Z = _stft(clip)
    fmask = np.zeros(len(f), dtype=bool)
    tmask = np.zeros(len(t), dtype=bool)
    for t0, t1 in time_spans:
        tmask |= (t >= t0) & (t < t1)
    for f0, f1 in freq_bands:
        fmask |= (f >= f0) & (f < f1)
    y = _band_stop(clip.samples, clip.sample_rate, _runs(fmask))
    y = _time_gate(y, _runs(tmask))
    out = clip.with_samples(y)
    if return_stft:
        mask = fmask[:, None] | tmask[None, :]
        Zm = np.where(mask[None], 0.0, Z)
        return out, (f, t, Z, Zm, mask)
    return out


def draw_tf_masks(duration, sample_rate, n_time_masks, n_freq_masks, max_time, max_freq, rng):
    nyquist = sample_rate / 2
    if max_time > duration or max_time < 0:
        raise RangeError(f"time-mask width {max_time} s exceeds clip duration {duration} s")
    if max_freq > nyquist or max_freq < 0:
        raise RangeError(f"frequency-mask width {max_freq} Hz exceeds Nyquist {nyquist} Hz")
    spans = []
    for _ in range(n_time_masks):
        w = rng.uniform(0, max_time)
        t0 = rng.uniform(0, duration - w)
        spans.append((t0, t0 + w))
    bands = []
    for _ in range(n_freq_masks):
        w = rng.uniform(0, max_freq)
        f0 = rng.uniform(0, nyquist - w)
        bands.append((f0, f0 + w))
    return spans, bands


def tf_mask(clip: AudioClip, labels, n_time_masks: int = 2, n_freq_masks: int = 2,
            max_time: float = 1.0, max_freq: float = 1000.0, rng=None):
    """Random masks shared by all channels; labels pass through unchanged."""
    if clip.length == 0:
        raise RangeError("cannot mask an empty clip")
    rng = np.random.default_rng(rng)
    spans, bands = draw_tf_masks(clip.duration, clip.sample_rate, n_time_masks, n_freq_masks,
                                 max_time, max_freq, rng)
    return apply_tf_masks(clip, spans, bands), list(labels)


# ---------------------------------------------------------------------------
# remixing


def remix(a, b, max_polyphony: int = MAX_POLYPHONY):
    """Sum two labelled clips (scaled by 1/sqrt(2)) and merge their labels."""
    (ca, la), (cb, lb) = a, b
    if ca.sample_rate != cb.sample_rate or ca.channels != cb.channels:
        raise FormatError(
            f"cannot remix {ca.channels} ch @ {ca.sample_rate} Hz with {cb.channels} ch @ {cb.sample_rate} Hz"
        )
    n = max(ca.length, cb.length)
    x = np.zeros((ca.channels, n))
    x[:, : ca.length] += ca.samples
    x[:, : cb.length] += cb.samples
    offset = max((fr.track_index for fr in la), default=-1) + 1
    labels = list(la) + [fr._replace(track_index=fr.track_index + offset) for fr in lb]
    busiest = max(polyphony(labels).values(), default=0)
    if busiest > max_polyphony:
        raise PolyphonyError(f"remix would have {busiest} simultaneous tracks (limit {max_polyphony})")
    return ca.with_samples(x / math.sqrt(2)), sort_frames(labels)


# ---------------------------------------------------------------------------
# dataset-level driver


@dataclass
class AugmentSummary:
    output_root: Path
    processed: int = 0
    skipped: list = None
    outputs: list = None

    def __post_init__(self):
        self.skipped = self.skipped or []
        self.outputs = self.outputs or []

    def line(self) -> str:
        return f"{self.processed} processed, {len(self.skipped)} skipped"


def file_seed(base_seed: int, name: str) -> int:
    """Per-file RNG seed independent of processing order."""
    return (int(base_seed) * 1_000_003 + zlib.crc32(name.encode("utf-8"))) % (2**32)


def _has_distance(labels) -> bool:
    return bool(labels) and labels[0].distance is not None


def apply_augmentation(dataset_path, aug_type: str, params=None, output_path=None) -> AugmentSummary:
    """Augment every (CSV, WAV) pair of a dataset into ``<dataset_path>_<suffix>``.

    ``params`` keys: ``seed``; ``patterns`` (channel-swap indices, default 1..15);
    ``yaw`` (rotate; random per file when absent); ``n_time_masks``, ``n_freq_masks``,
    ``max_time``, ``max_freq`` (tf-mask); ``max_polyphony`` (remix).
    """
    params = dict(params or {})
    aug = AUG_ALIASES.get(aug_type, aug_type)
    if aug not in SUFFIXES:
        raise ValueError(f"unknown augmentation {aug_type!r}; choose from {sorted(SUFFIXES)}")
    index = sio.scan_dataset(dataset_path)
    root = Path(dataset_path)
    out_root = Path(output_path) if output_path else root.with_name(f"{root.name}_{SUFFIXES[aug]}")
    summary = AugmentSummary(out_root, skipped=[(str(c), why) for c, why in index.skipped])
    for csv, why in index.skipped:
        log.warning("skipping %s: %s", csv, why)
    seed = int(params.get("seed", 0))

    def emit(csv, wav, name, clip, labels, with_distance):
        rel_csv = csv.relative_to(root).with_name(name + ".csv")
        rel_wav = wav.relative_to(root).with_name(name + ".wav")
        (out_root / rel_csv).parent.mkdir(parents=True, exist_ok=True)
        (out_root / rel_wav).parent.mkdir(parents=True, exist_ok=True)
        sio.write_wav(out_root / rel_wav, clip)
        sio.write_dcase_csv(out_root / rel_csv, labels, with_distance)
        summary.outputs.append((out_root / rel_wav, out_root / rel_csv))

    loaded = []
    for csv, wav, name in index.pairs:
        try:
            loaded.append((csv, wav, name, sio.read_wav(wav), sio.read_dcase_csv(csv)))
        except (FormatError, OSError) as e:
            log.warning("skipping %s: %s", csv, e)
            summary.skipped.append((str(csv), str(e)))

    if aug == "remix":
        if len(loaded) < 2:
            for csv, *_ in loaded:
                summary.skipped.append((str(csv), "remix needs at least two files"))
            return summary
        order = np.random.default_rng(seed).permutation(len(loaded))
        for i, j in zip(order, np.roll(order, -1)):
            csv, wav, name, clip, labels = loaded[i]
            _, _, other, clip_b, labels_b = loaded[j]
            try:
                mixed, mlabels = remix((clip, labels), (clip_b, labels_b),
                                       params.get("max_polyphony", MAX_POLYPHONY))
            except (FormatError, PolyphonyError) as e:
                log.warning("skipping %s: %s", csv, e)
                summary.skipped.append((str(csv), str(e)))
                continue
            emit(csv, wav, f"{name}_remix_{other}", mixed, mlabels, _has_distance(labels + labels_b))
            summary.processed += 1
        return summary

    for csv, wav, name, clip, labels in loaded:
        dist = _has_distance(labels)
        rng = np.random.default_rng(file_seed(seed, name))
        try:
            if aug == "channel-swap":
                for k in params.get("patterns") or range(1, 16):
                    out, lab = channel_swap(clip, labels, SwapPattern(int(k)))
                    emit(csv, wav, f"{name}_aug{int(k)}", out, lab, dist)
            elif aug == "rotate":
                yaw = params.get("yaw")
                yaw = float(rng.uniform(-180, 180)) if yaw is None else float(yaw)
                out, lab = rotate_soundscape(clip, labels, yaw)
                emit(csv, wav, name, out, lab, dist)
            else:
                out, lab = tf_mask(clip, labels, params.get("n_time_masks", 2), params.get("n_freq_masks", 2),
                                   params.get("max_time", 1.0), params.get("max_freq", 1000.0), rng)
                emit(csv, wav, name, out, lab, dist)
        except (FormatError, RangeError) as e:
            log.warning("skipping %s: %s", csv, e)
            summary.skipped.append((str(csv), str(e)))
            continue
        summary.processed += 1
    return summary
