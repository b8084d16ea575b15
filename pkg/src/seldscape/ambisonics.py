"""First-order ambisonics (ACN channel order, SN3D normalisation).

Channels are ``(W, Y, Z, X)``. Encoding is frequency independent.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .audio import AudioClip
from .errors import ConditioningError, FormatError, NoEstimateError, RangeError
from .geometry import cartesian_to_spherical

SILENCE_DB = -80.0
MAX_CONDITION = 1e6


class ShGains(NamedTuple):
    w: float
    y: float
    z: float
    x: float


_QUARTER_TURNS = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))


def _cos_sin(degrees: float):
    # exact values on the axes, where radians() would leave a 6e-17 residue
    q, r = divmod(degrees, 90.0)
    if r == 0:
        return _QUARTER_TURNS[int(q) % 4]
    a = math.radians(degrees)
    return math.cos(a), math.sin(a)


def sh_gains(azimuth: float, elevation: float) -> ShGains:
    """Plane-wave encoding gains for a direction given in degrees."""
    if not -90.0 <= elevation <= 90.0:
        raise RangeError(f"elevation {elevation} outside [-90, 90]")
    ca, sa = _cos_sin(azimuth % 360.0)
    ce, se = _cos_sin(elevation)
    return ShGains(1.0, sa * ce, se, ca * ce)


def sh_gains_vec(directions) -> np.ndarray:
    """Gains for an ``(n, 3)`` array of unit vectors, returned as ``(n, 4)`` rows ``(1, y, z, x)``."""
    u = np.atleast_2d(np.asarray(directions, dtype=float))
    return np.column_stack([np.ones(len(u)), u[:, 1], u[:, 2], u[:, 0]])


def encode_plane_wave(signal, azimuth, elevation, sample_rate=None) -> AudioClip:
    """FOA clip of a mono signal (array or single-channel clip) arriving from one direction."""
    g = np.array(sh_gains(azimuth, elevation))
    if isinstance(signal, AudioClip):
        sample_rate = sample_rate or signal.sample_rate
        signal = signal.samples
    if sample_rate is None:
        raise ValueError("sample_rate is required for array input")
    s = np.asarray(signal, dtype=float).reshape(-1)
    return AudioClip(g[:, None] * s[None, :], sample_rate)


def encoding_matrix(capsule_directions) -> np.ndarray:
    """Least-squares FOA encoder (4 x C) for capsules at the given (az, el) directions."""
    dirs = list(capsule_directions)
    if len(dirs) < 4:
        raise RangeError(f"need at least 4 capsules for first-order encoding, got {len(dirs)}")
    Y = np.array([sh_gains(az, el) for az, el in dirs])       # (C, 4)
    cond = np.linalg.cond(Y)
    if not np.isfinite(cond) or cond >= MAX_CONDITION:
        raise ConditioningError(cond)
    return np.linalg.pinv(Y)


def encode_capsules_to_foa(clip: AudioClip, capsule_directions) -> AudioClip:
    """Convert capsule signals (one channel per direction) into a 4-channel FOA clip."""
    dirs = list(capsule_directions)
    if clip.channels != len(dirs):
        raise FormatError(f"clip has {clip.channels} channels but {len(dirs)} capsule directions were given")
    E = encoding_matrix(dirs)
    return AudioClip(E @ clip.samples, clip.sample_rate)


def doa_estimate(foa: AudioClip, frame=None):
    """Direction of arrival from the time-averaged pseudo-intensity vector.

    ``frame`` is a ``(start, stop)`` sample range or a slice; default is the whole clip.
    """
    if foa.channels != 4:
        raise FormatError(f"DOA estimation needs 4 FOA channels, got {foa.channels}")
    if frame is None:
        sl = slice(None)
    elif isinstance(frame, slice):
        sl = frame
    else:
        sl = slice(int(frame[0]), int(frame[1]))
    seg = foa.samples[:, sl]
    if seg.shape[1] == 0:
        raise NoEstimateError("empty analysis frame")
    w, y, z, x = seg
    if np.mean(w**2) <= 10 ** (SILENCE_DB / 10):
        raise NoEstimateError("analysis frame is silent")
    intensity = np.array([np.dot(w, x), np.dot(w, y), np.dot(w, z)])
    if not np.any(intensity):
        raise NoEstimateError("zero intensity vector")
    az, el, _ = cartesian_to_spherical(intensity)
    return az, el


def angular_distance(az1, el1, az2, el2) -> float:
    """Great-circle angle in degrees between two directions."""
    a1, e1, a2, e2 = map(math.radians, (az1, el1, az2, el2))
    c = math.sin(e1) * math.sin(e2) + math.cos(e1) * math.cos(e2) * math.cos(a1 - a2)
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))
