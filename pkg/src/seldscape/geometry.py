"""Coordinates, shoebox rooms, microphone arrays and source trajectories.

Angles follow the DCASE label convention: azimuth counterclockwise from +x
in the horizontal plane, elevation positive upward, both in degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DegenerateError, GeometryError, RangeError

SPEED_OF_SOUND = 343.0
TRAJECTORY_MARGIN = 0.01
WALK_STEP = 0.1
WALK_SIGMA = 0.05


class Vec3(NamedTuple):
    x: float
    y: float
    z: float

    @classmethod
    def of(cls, p) -> "Vec3":
        a = np.asarray(p, dtype=float).reshape(-1)
        if a.shape != (3,):
            raise GeometryError(f"expected an xyz triple, got {p!r}")
        if not np.all(np.isfinite(a)):
            raise GeometryError(f"non-finite coordinate in {p!r}")
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def array(self) -> np.ndarray:
        return np.array(self, dtype=float)


@dataclass(frozen=True)
class RoomSpec:
    """Shoebox room with a single pressure reflection coefficient on all walls."""

    dims: Vec3
    reflection: float = 0.8
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        dims = Vec3.of(self.dims)
        object.__setattr__(self, "dims", dims)
        if min(dims) <= 0:
            raise GeometryError(f"room dimensions must be positive, got {dims}")
        if not 0.0 <= self.reflection < 1.0:
            raise RangeError(f"reflection coefficient must lie in [0, 1), got {self.reflection}")
        if self.speed_of_sound <= 0:
            raise RangeError("speed of sound must be positive")

    @property
    def volume(self) -> float:
        x, y, z = self.dims
        return x * y * z

    @property
    def surface(self) -> float:
        x, y, z = self.dims
        return 2.0 * (x * y + x * z + y * z)

    @property
    def absorption(self) -> float:
        return 1.0 - self.reflection**2

    def sabine_t60(self) -> float:
        """Sabine reverberation time, ``inf`` for a lossless room."""
        if self.absorption == 0:
            return math.inf
        return 0.161 * self.volume / (self.surface * self.absorption)

    def contains(self, p, margin: float = 0.0) -> bool:
        a = np.asarray(p, dtype=float)
        return bool(np.all(a > margin) and np.all(a < self.dims.array() - margin))

    def clamp(self, p, margin: float = TRAJECTORY_MARGIN) -> np.ndarray:
        d = self.dims.array()
        return np.clip(np.asarray(p, dtype=float), margin, d - margin)


def cartesian_to_spherical(p, origin=(0.0, 0.0, 0.0)):
    """Return ``(azimuth, elevation, distance)`` of ``p`` seen from ``origin``.

    Azimuth lies in [-180, 180); at the poles it is reported as 0.
    """
    v = np.asarray(p, dtype=float) - np.asarray(origin, dtype=float)
    dist = float(np.linalg.norm(v))
    if dist == 0.0:
        raise DegenerateError("direction undefined: point coincides with origin")
    horiz = math.hypot(v[0], v[1])
    el = math.degrees(math.atan2(v[2], horiz))
    if horiz <= 1e-12 * dist:
        return 0.0, (90.0 if v[2] > 0 else -90.0), dist
    az = math.degrees(math.atan2(v[1], v[0]))
    return wrap_azimuth(az), el, dist


def spherical_to_cartesian(azimuth, elevation, distance=1.0, origin=(0.0, 0.0, 0.0)) -> np.ndarray:
    az = np.radians(azimuth)
    el = np.radians(elevation)
    v = distance * np.array([np.cos(az) * np.cos(el), np.sin(az) * np.cos(el), np.sin(el)])
    return v + np.asarray(origin, dtype=float)


def wrap_azimuth(az):
    """Wrap degrees into [-180, 180)."""
    w = (np.asarray(az, dtype=float) + 180.0) % 360.0 - 180.0
    return float(w) if np.ndim(w) == 0 else w


def unit(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    n = np.linalg.norm(a)
    if n == 0:
        raise DegenerateError("zero-length direction vector")
    return a / n


# ---------------------------------------------------------------------------
# microphone arrays

# (colatitude, azimuth) in degrees of the 32 capsules of a 4.2 cm spherical array
_EM32_COLAT_AZ = [
    (69, 0), (90, 32), (111, 0), (90, 328), (32, 0), (55, 45), (90, 69), (125, 45),
    (148, 0), (125, 315), (90, 291), (55, 315), (21, 91), (58, 90), (121, 90), (159, 89),
    (69, 180), (90, 212), (111, 180), (90, 148), (32, 180), (55, 225), (90, 249), (125, 225),
    (148, 180), (125, 135), (90, 111), (55, 135), (21, 269), (58, 270), (122, 270), (159, 271),
]
# (azimuth, elevation) of the tetrahedral MIC-format array used in DCASE recordings
_TETRA_AZ_EL = [(45, 35), (-45, -35), (135, -35), (-135, 35)]
_SPHERE_RADIUS = 0.042

DIRECTIVITIES = ("omni", "cardioid")


@dataclass(frozen=True)
class Capsule:
    offset: Vec3
    directivity: str = "omni"
    look: Vec3 = Vec3(1.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "offset", Vec3.of(self.offset))
        look = Vec3.of(self.look)
        if abs(np.linalg.norm(look.array()) - 1.0) > 1e-9:
            raise GeometryError(f"capsule look direction must be a unit vector, got {look}")
        object.__setattr__(self, "look", look)
        if self.directivity not in DIRECTIVITIES:
            raise ValueError(f"unknown directivity {self.directivity!r}")

    def gain(self, arrival_dirs) -> np.ndarray:
        """Directivity gain for unit vectors pointing from the capsule toward the source."""
        u = np.atleast_2d(np.asarray(arrival_dirs, dtype=float))
        if self.directivity == "omni":
            return np.ones(len(u))
        return 0.5 * (1.0 + u @ self.look.array())


@dataclass(frozen=True)
class MicArray:
    center: Vec3
    capsules: tuple
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "center", Vec3.of(self.center))
        caps = tuple(self.capsules)
        if not caps:
            raise GeometryError("a microphone array needs at least one capsule")
        object.__setattr__(self, "capsules", caps)

    @classmethod
    def from_offsets(cls, center, offsets, directivity="omni", name="custom"):
        """Build an array from capsule offsets; cardioids look radially outward."""
        caps = []
        for off in offsets:
            off = Vec3.of(off)
            if np.linalg.norm(off.array()) > 0:
                look = Vec3.of(unit(off.array()))
            else:
                look = Vec3(1.0, 0.0, 0.0)
            caps.append(Capsule(off, directivity, look))
        return cls(center, tuple(caps), name)

    @classmethod
    def preset(cls, name: str, center, directivity: str = "cardioid") -> "MicArray":
        """Resolve a named layout: ``em32``, ``tetra`` (alias ``mic``) or ``omni``."""
        key = name.lower()
        if key == "em32":
            dirs = [spherical_to_cartesian(az, 90.0 - colat, _SPHERE_RADIUS) for colat, az in _EM32_COLAT_AZ]
        elif key in ("tetra", "tetrahedral", "mic"):
            dirs = [spherical_to_cartesian(az, el, _SPHERE_RADIUS) for az, el in _TETRA_AZ_EL]
        elif key == "omni":
            return cls(center, (Capsule(Vec3(0.0, 0.0, 0.0)),), "omni")
        else:
            raise ValueError(f"unknown microphone preset {name!r}")
        return cls.from_offsets(center, dirs, directivity, key if key != "mic" else "tetra")

    @property
    def n_capsules(self) -> int:
        return len(self.capsules)

    def positions(self) -> np.ndarray:
        c = self.center.array()
        return np.array([c + cap.offset.array() for cap in self.capsules])

    def directions(self):
        """(azimuth, elevation) of each capsule offset; the center capsule reports (0, 0)."""
        out = []
        for cap in self.capsules:
            off = cap.offset.array()
            if np.linalg.norm(off) == 0:
                out.append((0.0, 0.0))
            else:
                az, el, _ = cartesian_to_spherical(off)
                out.append((az, el))
        return out

    def check_inside(self, room: RoomSpec):
        for i, p in enumerate(self.positions()):
            if not room.contains(p):
                raise GeometryError(f"capsule {i} at {tuple(p)} lies outside room {tuple(room.dims)}")


# ---------------------------------------------------------------------------
# trajectories

TRAJECTORY_MODES = ("static", "linear", "spline", "random_walk")


@dataclass(frozen=True)
class Trajectory:
    """A source path through ``waypoints`` traversed over ``duration`` seconds.

    ``bounds`` (room dimensions) enables clamping of sampled positions to stay
    1 cm inside the walls. ``seed`` only matters for ``random_walk``.
    """

    waypoints: tuple
    mode: str = "static"
    duration: float = 0.0
    bounds: Vec3 | None = None
    seed: int = 0

    def __post_init__(self):
        wps = tuple(Vec3.of(w) for w in self.waypoints)
        object.__setattr__(self, "waypoints", wps)
        if self.bounds is not None:
            object.__setattr__(self, "bounds", Vec3.of(self.bounds))
        if self.mode not in TRAJECTORY_MODES:
            raise ValueError(f"unknown trajectory mode {self.mode!r}")
        if not wps:
            raise GeometryError("trajectory needs at least one waypoint")
        if self.mode == "static" and len(wps) != 1:
            raise GeometryError("static trajectory takes exactly one waypoint")
        if self.mode in ("linear", "spline") and len(wps) < 2:
            raise GeometryError(f"{self.mode} trajectory needs at least two waypoints")
        if self.duration < 0:
            raise RangeError("trajectory duration must be non-negative")

    @classmethod
    def from_waypoints(cls, waypoints, duration, bounds=None, mode=None, seed=0):
        wps = np.asarray(waypoints, dtype=float)
        if wps.ndim == 1:
            wps = wps[None, :]
        if mode is None:
            mode = "static" if len(wps) == 1 else "linear"
        return cls(tuple(map(tuple, wps)), mode, float(duration), bounds, seed)

    @property
    def path_length(self) -> float:
        w = np.array(self.waypoints)
        return float(np.linalg.norm(np.diff(w, axis=0), axis=1).sum()) if len(w) > 1 else 0.0

    @cached_property
    def _knots(self):
        # cumulative chord length of each waypoint, normalised to [0, 1]
        w = np.array(self.waypoints)
        seg = np.linalg.norm(np.diff(w, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        if cum[-1] == 0:
            return np.linspace(0.0, 1.0, len(w))
        return cum / cum[-1]

    @cached_property
    def _spline(self):
        w = np.array(self.waypoints)
        knots = self._knots
        # repeated waypoints would make the knot vector non-increasing
        keep = np.concatenate([[True], np.diff(knots) > 0])
        return CubicSpline(knots[keep], w[keep], bc_type="natural", axis=0)

    @cached_property
    def _walk(self):
        """Brownian bridges pinned at every waypoint, on a 100 ms grid."""
        w = np.array(self.waypoints)
        n_steps = max(1, int(math.ceil(self.duration / WALK_STEP - 1e-9)))
        wp_times = self._knots * self.duration if len(w) > 1 else np.array([0.0, self.duration])
        times = np.unique(np.concatenate([np.linspace(0.0, self.duration, n_steps + 1), wp_times]))
        if len(w) > 1:
            u = times / self.duration if self.duration > 0 else np.zeros_like(times)
            base = np.array([np.interp(u, self._knots, w[:, k]) for k in range(3)]).T
        else:
            base = np.repeat(w, len(times), axis=0)
        anchors = np.searchsorted(times, wp_times)
        rng = np.random.default_rng(self.seed)
        dt = np.diff(times)
        steps = rng.normal(0.0, 1.0, size=(len(dt), 3)) * (WALK_SIGMA * np.sqrt(dt / WALK_STEP))[:, None]
        dev = np.zeros_like(base)
        for a, b in zip(anchors[:-1], anchors[1:]):
            if b <= a:
                continue
            walk = np.concatenate([[np.zeros(3)], np.cumsum(steps[a:b], axis=0)])
            frac = ((times[a : b + 1] - times[a]) / (times[b] - times[a]))[:, None]
            dev[a : b + 1] = walk - frac * walk[-1]
        return times, base + dev

    def sample(self, t: float) -> Vec3:
        return sample_trajectory(self, t)


def sample_trajectory(traj: Trajectory, t: float) -> Vec3:
    """Position of the source ``t`` seconds into the trajectory."""
    if not (-1e-9 <= t <= traj.duration + 1e-9):
        raise RangeError(f"t={t} outside trajectory duration [0, {traj.duration}]")
    t = min(max(t, 0.0), traj.duration)
    u = t / traj.duration if traj.duration > 0 else 0.0
    w = np.array(traj.waypoints)
    if traj.mode == "static":
        p = w[0]
    elif traj.mode == "linear":
        p = np.array([np.interp(u, traj._knots, w[:, k]) for k in range(3)])
    elif traj.mode == "spline":
        p = traj._spline(u)
    else:
        times, pts = traj._walk
        p = np.array([np.interp(t, times, pts[:, k]) for k in range(3)])
    if traj.bounds is not None:
        d = traj.bounds.array()
        p = np.clip(p, TRAJECTORY_MARGIN, d - TRAJECTORY_MARGIN)
    return Vec3.of(p)


def random_position(room: RoomSpec, rng, margin: float = 0.5) -> Vec3:
    """Uniform position inside ``room`` keeping ``margin`` meters from the walls."""
    d = room.dims.array()
    m = np.minimum(margin, d / 4)
    return Vec3.of(rng.uniform(m, d - m))


__all__ = [
    "SPEED_OF_SOUND", "Vec3", "RoomSpec", "Capsule", "MicArray", "Trajectory",
    "sample_trajectory", "cartesian_to_spherical", "spherical_to_cartesian",
    "wrap_azimuth", "unit", "random_position",
]
