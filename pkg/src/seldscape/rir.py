"""Room impulse responses: image-source synthesis for shoebox rooms and
databases of measured responses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .ambisonics import sh_gains_vec
from .audio import AudioClip
from .errors import AnalysisError, DegenerateError, FormatError, GeometryError
from .geometry import MicArray, RoomSpec, Vec3

DEFAULT_SAMPLE_RATE = 24000
MAX_ORDER_CAP = 40
KERNEL_TAPS = 81
_HALF = KERNEL_TAPS // 2
RIR_FORMATS = ("capsules", "foa")


@dataclass(frozen=True, eq=False)
class Rir:
    taps: np.ndarray
    sample_rate: int
    source_pos: Vec3
    mic_center: Vec3
    format: str = "capsules"

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=float)
        if taps.ndim == 1:
            taps = taps[None, :]
        if taps.ndim != 2 or taps.shape[1] == 0:
            raise FormatError(f"RIR taps must be a non-empty channels x length matrix, got {taps.shape}")
        if not np.all(np.isfinite(taps)):
            raise FormatError("RIR contains non-finite samples")
        if self.format not in RIR_FORMATS:
            raise FormatError(f"unknown RIR format {self.format!r}")
        if self.format == "foa" and taps.shape[0] != 4:
            raise FormatError(f"FOA RIR needs 4 channels, got {taps.shape[0]}")
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "source_pos", Vec3.of(self.source_pos))
        object.__setattr__(self, "mic_center", Vec3.of(self.mic_center))

    @property
    def channels(self) -> int:
        return self.taps.shape[0]

    @property
    def length(self) -> int:
        return self.taps.shape[1]

    def as_clip(self) -> AudioClip:
        return AudioClip(self.taps, self.sample_rate)


@dataclass(frozen=True)
class ImageSource:
    position: Vec3
    order: int
    amplitude: float
    delay: float


def _check_geometry(room: RoomSpec, source, mics):
    src = np.asarray(source, dtype=float)
    if not room.contains(src):
        raise GeometryError(f"source {tuple(src)} lies outside room {tuple(room.dims)}")
    for m in np.atleast_2d(mics):
        if not room.contains(m):
            raise GeometryError(f"microphone {tuple(m)} lies outside room {tuple(room.dims)}")
        if np.allclose(m, src, rtol=0, atol=1e-12):
            raise DegenerateError("source coincides with a microphone")


def image_lattice(room: RoomSpec, source, max_order: int):
    """Positions and reflection counts of all images up to ``max_order``.

    Along an axis of length L the m-th image of coordinate s sits at
    ``m*L + s`` for even m and ``m*L + (L - s)`` for odd m; it has undergone
    ``|m|`` reflections on that axis.
    """
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    m, order = _lattice(int(max_order))
    L = room.dims.array()
    s = np.asarray(source, dtype=float)
    pos = m * L + np.where(m % 2 == 0, s, L - s)
    return pos, order


@lru_cache(maxsize=8)
def _lattice(max_order: int):
    r = np.arange(-max_order, max_order + 1)
    a, b, c = np.meshgrid(r, r, r, indexing="ij")
    m = np.stack([a.ravel(), b.ravel(), c.ravel()], axis=1)
    order = np.abs(m).sum(axis=1)
    keep = order <= max_order
    m, order = m[keep], order[keep]
    m.flags.writeable = False
    order.flags.writeable = False
    return m, order


def enumerate_images(room: RoomSpec, source, mic, max_order: int) -> list[ImageSource]:
    """All image sources with at most ``max_order`` reflections, direct path first."""
    _check_geometry(room, source, mic)
    pos, order = image_lattice(room, source, max_order)
    d = np.linalg.norm(pos - np.asarray(mic, dtype=float), axis=1)
    amp = room.reflection ** order / (4 * np.pi * d)
    delay = d / room.speed_of_sound
    idx = np.lexsort((delay, order))
    return [ImageSource(Vec3.of(pos[i]), int(order[i]), float(amp[i]), float(delay[i])) for i in idx]


def default_max_order(room: RoomSpec, source, mic, cap: int = MAX_ORDER_CAP) -> int:
    """Smallest order whose strongest image is 80 dB below the direct path, capped."""
    if room.reflection == 0:
        return 0
    pos, order = image_lattice(room, source, cap)
    d = np.linalg.norm(pos - np.asarray(mic, dtype=float), axis=1)
    d0 = np.linalg.norm(np.asarray(source, dtype=float) - np.asarray(mic, dtype=float))
    dmin = np.full(cap + 1, np.inf)
    np.minimum.at(dmin, order, d)
    for n in range(cap + 1):
        if room.reflection**n / dmin[n] < 1e-4 / d0:
            return n
    return cap


def fractional_delay_kernel(delays):
    """81-tap Hann-windowed sinc kernels for delays given in samples.

    Returns ``(index, value)`` arrays of shape ``(len(delays), 81)``.
    """
    t = np.asarray(delays, dtype=float)
    n0 = np.round(t).astype(np.int64)
    k = np.arange(-_HALF, _HALF + 1)
    idx = n0[:, None] + k
    f = (t - n0)[:, None]                 # fractional part in [-0.5, 0.5]
    # x = k - f; expand sin and cos of (k - f) so only per-image and per-tap terms are evaluated
    a = np.pi * k / (_HALF + 1)
    b = np.pi * f / (_HALF + 1)
    win = 0.5 * (1.0 + np.cos(a) * np.cos(b) + np.sin(a) * np.sin(b))
    x = k - f
    sign = np.where(k % 2 == 0, -1.0, 1.0)     # sin(pi*(k - f)) = -(-1)^k sin(pi*f)
    with np.errstate(divide="ignore", invalid="ignore"):
        sinc = sign * np.sin(np.pi * f) / (np.pi * x)
    sinc = np.where(np.abs(x) < 1e-12, 1.0, sinc)
    return idx, sinc * win


def _render_impulses(delays, weights, length):
    """Sum weighted fractional-delay impulses into ``len(weights)`` channels.

    ``weights`` has shape (channels, n_images); ``delays`` (n_images,) in samples
    or (channels, n_images) when each channel sees its own delay.
    """
    weights = np.atleast_2d(weights)
    n_ch = len(weights)
    # shift by the kernel half-width so early taps never index below zero, then trim
    padded = length + 2 * _HALF + 1
    shared = np.ndim(delays) == 1
    if shared:
        idx, ker = fractional_delay_kernel(delays)
        idx = idx + _HALF
    out = np.empty((n_ch, length))
    for ch, w in enumerate(weights):
        if not shared:
            idx, ker = fractional_delay_kernel(delays[ch])
            idx = idx + _HALF
        acc = np.bincount(idx.ravel(), (ker * w[:, None]).ravel(), minlength=padded)
        out[ch] = acc[_HALF:_HALF + length]
    return out


def synth_rir(room: RoomSpec, source, array: MicArray, sample_rate: int = DEFAULT_SAMPLE_RATE,
              max_order: int | None = None) -> Rir:
    """Per-capsule impulse responses of a shoebox room (open-array model)."""
    array.check_inside(room)
    caps = array.positions()
    _check_geometry(room, source, caps)
    src = np.asarray(source, dtype=float)
    if max_order is None:
        max_order = default_max_order(room, src, array.center.array())
    pos, order = image_lattice(room, src, max_order)
    refl = room.reflection ** order

    vec = pos[None, :, :] - caps[:, None, :]          # capsule -> image
    dist = np.linalg.norm(vec, axis=2)
    delays = dist / room.speed_of_sound * sample_rate
    weights = refl[None, :] / (4 * np.pi * dist)
    for c, cap in enumerate(array.capsules):
        if cap.directivity != "omni":
            weights[c] *= cap.gain(vec[c] / dist[c][:, None])
    length = int(math.ceil(delays.max())) + KERNEL_TAPS
    taps = _render_impulses(delays, weights, length)
    return Rir(taps, sample_rate, Vec3.of(src), array.center, "capsules")


def synth_foa_rir(room: RoomSpec, source, mic_center, sample_rate: int = DEFAULT_SAMPLE_RATE,
                  max_order: int | None = None) -> Rir:
    """Four-channel ACN/SN3D impulse response, each image encoded by its arrival direction."""
    mic = np.asarray(mic_center, dtype=float)
    _check_geometry(room, source, mic)
    src = np.asarray(source, dtype=float)
    if max_order is None:
        max_order = default_max_order(room, src, mic)
    pos, order = image_lattice(room, src, max_order)
    vec = pos - mic
    dist = np.linalg.norm(vec, axis=1)
    amp = room.reflection ** order / (4 * np.pi * dist)
    gains = sh_gains_vec(vec / dist[:, None])       # (n_images, 4)
    delays = dist / room.speed_of_sound * sample_rate
    length = int(math.ceil(delays.max())) + KERNEL_TAPS
    taps = _render_impulses(delays, (gains * amp[:, None]).T, length)
    return Rir(taps, sample_rate, Vec3.of(src), Vec3.of(mic), "foa")


def energy_decay_curve(h) -> np.ndarray:
    """Backward-integrated energy in dB relative to total energy."""
    e = np.cumsum(np.asarray(h, dtype=float)[::-1] ** 2)[::-1]
    with np.errstate(divide="ignore"):
        return 10 * np.log10(e / e[0])


def estimate_t60(rir, min_fit_seconds: float = 0.005) -> float:
    """Reverberation time from a -5..-25 dB line fit of the Schroeder decay (channel 0).

    Raises AnalysisError when the decay does not span 20 dB over at least
    ``min_fit_seconds`` (an impulse or an anechoic response).
    """
    if isinstance(rir, Rir):
        h, sr = rir.taps[0], rir.sample_rate
    else:
        h, sr = rir.samples[0], rir.sample_rate
    if not np.any(h):
        raise AnalysisError("impulse response is all zeros")
    edc = energy_decay_curve(h)
    below5 = np.flatnonzero(edc <= -5.0)
    below25 = np.flatnonzero(edc <= -25.0)
    if len(below5) == 0 or len(below25) == 0:
        raise AnalysisError("decay range below 25 dB")
    i5, i25 = below5[0], below25[0]
    if (i25 - i5) < max(3, min_fit_seconds * sr):
        raise AnalysisError("insufficient decay range: -5..-25 dB span too short for a fit")
    t = np.arange(i5, i25) / sr
    slope, _ = np.polyfit(t, edc[i5:i25], 1)
    if slope >= 0:
        raise AnalysisError("energy decay curve does not decrease")
    return -60.0 / slope


# ---------------------------------------------------------------------------
# measured-RIR databases


@dataclass(frozen=True, eq=False)
class RirDatabase:
    room_id: str
    sample_rate: int
    format: str
    positions: np.ndarray
    rirs: tuple
    mic_center: Vec3 = Vec3(0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "mic_center", Vec3.of(self.mic_center))
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        rirs = tuple(self.rirs)
        if len(rirs) == 0:
            raise FormatError("RIR database has no entries")
        if pos.shape != (len(rirs), 3):
            raise FormatError(f"{len(rirs)} RIRs but positions have shape {pos.shape}")
        chans = {r.channels for r in rirs}
        if len(chans) != 1 or any(r.sample_rate != self.sample_rate for r in rirs):
            raise FormatError("database entries must share sample rate and channel count")
        if any(r.format != self.format for r in rirs):
            raise FormatError("database entries must share the format")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "rirs", rirs)

    @property
    def channels(self) -> int:
        return self.rirs[0].channels

    def rir_at(self, pos):
        return nearest_rir(self, pos)

    @property
    def entries(self):
        return [(Vec3.of(p), r) for p, r in zip(self.positions, self.rirs)]


def nearest_rir(db: RirDatabase, pos):
    """Entry closest to ``pos`` and its position; ties go to the lowest index."""
    d = np.linalg.norm(db.positions - np.asarray(pos, dtype=float), axis=1)
    i = int(np.argmin(d))
    return db.rirs[i], Vec3.of(db.positions[i])


def load_rir_database(path) -> RirDatabase:
    from . import io as sio

    root = Path(path)
    meta_path = root / "meta.json"
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FormatError(f"{meta_path}: missing database metadata") from None
    except json.JSONDecodeError as e:
        raise FormatError(f"{meta_path}: invalid JSON ({e})") from None
    for key in ("room_id", "sample_rate", "format", "positions"):
        if key not in meta:
            raise FormatError(f"{meta_path}: missing key {key!r}")
    fmt = meta["format"]
    if fmt not in RIR_FORMATS:
        raise FormatError(f"{meta_path}: unknown format {fmt!r}")
    positions = np.asarray(meta["positions"], dtype=float)
    if positions.ndim != 2 or positions.shape[1] != 3:
        raise FormatError(f"{meta_path}: positions must be a list of xyz triples")
    mic_center = meta.get("mic_center", [0.0, 0.0, 0.0])
    rirs = []
    for i, p in enumerate(positions):
        wav = root / f"rir_{i}.wav"
        if not wav.exists():
            raise FormatError(f"{wav}: missing RIR file for position {i}")
        clip = sio.read_wav(wav)
        if clip.sample_rate != meta["sample_rate"]:
            raise FormatError(f"{wav}: sample rate {clip.sample_rate} != {meta['sample_rate']}")
        try:
            rirs.append(Rir(clip.samples, clip.sample_rate, p, mic_center, fmt))
        except FormatError as e:
            raise FormatError(f"{wav}: {e}") from None
    try:
        return RirDatabase(str(meta["room_id"]), int(meta["sample_rate"]), fmt, positions, tuple(rirs), mic_center)
    except FormatError as e:
        raise FormatError(f"{root}: {e}") from None


def save_rir_database(path, db: RirDatabase):
    from . import io as sio

    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    meta = {
        "room_id": db.room_id,
        "sample_rate": db.sample_rate,
        "format": db.format,
        "positions": db.positions.tolist(),
        "mic_center": list(db.mic_center),
    }
    (root / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    for i, r in enumerate(db.rirs):
        sio.write_wav(root / f"rir_{i}.wav", r.as_clip())
    return root
