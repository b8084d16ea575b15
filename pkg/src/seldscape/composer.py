"""Declarative soundscape scenes: specs with random parameters, seeded
instantiation, and rendering to audio plus strong labels.

Class labels are corpus subdirectory names. Class indices default to the
alphabetical rank among the foreground corpus labels.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from . import io as sio
from .annotations import FRAME_SECONDS, AnnotationFrame, active_frames, sort_frames
from .audio import AudioClip
from .errors import CorpusError, FormatError, SamplingError, SchemaError
from .geometry import (
    MicArray,
    RoomSpec,
    Trajectory,
    Vec3,
    cartesian_to_spherical,
    random_position,
)
from .rir import RirDatabase, load_rir_database
from .spatializer import (
    VirtualRoom,
    convolve,
    mix,
    normalize_peak,
    pitch_shift,
    render_moving,
    rir_at,
    scale_to_snr,
    time_stretch,
)

LOOP_CROSSFADE = 0.05
DEFAULT_SNR = (6.0, 30.0)
MAX_TRUNCATION_ATTEMPTS = 1000
KINDS = ("const", "choose", "uniform", "normal")


@dataclass(frozen=True)
class DistributionSpec:
    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown distribution {self.kind!r}")
        p = self.params
        if self.kind == "uniform" and np.any(np.asarray(p[0]) > np.asarray(p[1])):
            raise ValueError(f"uniform bounds reversed: {p}")
        if self.kind == "normal" and p[1] < 0:
            raise ValueError("normal distribution needs std >= 0")

    @classmethod
    def const(cls, value):
        return cls("const", (value,))

    @classmethod
    def choose(cls, options=()):
        return cls("choose", (tuple(options),))

    @classmethod
    def uniform(cls, lo, hi):
        return cls("uniform", (lo, hi))

    @classmethod
    def normal(cls, mean, std, lo=None, hi=None):
        return cls("normal", (mean, std, lo, hi))

    @classmethod
    def parse(cls, obj):
        """Accept ``["const", v]``-style lists, tuples like the Python API, or bare numbers."""
        if isinstance(obj, DistributionSpec):
            return obj
        if isinstance(obj, (list, tuple)) and obj and isinstance(obj[0], str) and obj[0] in KINDS:
            kind, *rest = obj
            if kind == "const" and len(rest) == 1:
                return cls.const(_freeze(rest[0]))
            if kind == "choose" and len(rest) == 1:
                return cls.choose(_freeze(rest[0]))
            if kind == "uniform" and len(rest) == 2:
                return cls.uniform(_freeze(rest[0]), _freeze(rest[1]))
            if kind == "normal" and len(rest) in (2, 4):
                return cls.normal(*rest)
            raise ValueError(f"malformed {kind} distribution: {obj!r}")
        return cls.const(_freeze(obj))

    @property
    def is_corpus_choice(self) -> bool:
        return self.kind == "choose" and len(self.params[0]) == 0

    def to_json(self):
        if self.kind == "choose":
            return ["choose", _thaw(self.params[0])]
        if self.kind == "normal":
            mean, std, lo, hi = self.params
            return ["normal", mean, std] if lo is None and hi is None else ["normal", mean, std, lo, hi]
        return [self.kind, *(_thaw(p) for p in self.params)]


def _freeze(v):
    if isinstance(v, list):
        return tuple(_freeze(x) for x in v)
    return v


def _thaw(v):
    if isinstance(v, tuple):
        return [_thaw(x) for x in v]
    return v


def sample_distribution(spec: DistributionSpec, rng, corpus=None):
    """Draw one value. ``corpus`` backs ``choose`` over an empty list."""
    kind, p = spec.kind, spec.params
    if kind == "const":
        return p[0]
    if kind == "choose":
        options = p[0] if p[0] else tuple(corpus or ())
        if not options:
            raise CorpusError("nothing to choose from: empty option list and empty corpus")
        return options[int(rng.integers(len(options)))]
    if kind == "uniform":
        lo, hi = p
        if np.ndim(lo):
            return tuple(float(v) for v in rng.uniform(np.asarray(lo, float), np.asarray(hi, float)))
        return float(rng.uniform(lo, hi))
    mean, std, lo, hi = p
    for _ in range(MAX_TRUNCATION_ATTEMPTS):
        v = float(rng.normal(mean, std))
        if (lo is None or v >= lo) and (hi is None or v <= hi):
            return v
    raise SamplingError(f"normal({mean}, {std}) never fell inside [{lo}, {hi}] in {MAX_TRUNCATION_ATTEMPTS} draws")


# ---------------------------------------------------------------------------
# scene specification


@dataclass(frozen=True)
class BackgroundSpec:
    label: DistributionSpec = DistributionSpec.choose()
    source_file: DistributionSpec = DistributionSpec.choose()
    source_time: DistributionSpec = DistributionSpec.const(0.0)
    placement: object = "diffuse"   # "diffuse", an xyz triple, or a DistributionSpec over positions


@dataclass(frozen=True)
class EventSpec:
    label: DistributionSpec = DistributionSpec.choose()
    source_file: DistributionSpec = DistributionSpec.choose()
    source_time: DistributionSpec = DistributionSpec.const(0.0)
    event_time: DistributionSpec | None = None          # default: uniform over the scene
    event_duration: DistributionSpec | None = None      # default: the rest of the source file
    snr: DistributionSpec = DistributionSpec.uniform(*DEFAULT_SNR)
    trajectory: object = None                           # waypoint list, DistributionSpec, or None (random)
    trajectory_mode: str | None = None
    pitch_shift: DistributionSpec | None = None
    time_stretch: DistributionSpec | None = None


@dataclass(frozen=True)
class SceneSpec:
    duration: float
    room: object                  # VirtualRoom or a path to a measured-RIR database
    fg_path: Path
    bg_path: Path | None = None
    ref_db: float = -50.0
    seed: int = 0
    backgrounds: tuple = ()
    events: tuple = ()
    sample_rate: int = 24000
    label_map: dict | None = None
    with_distance: bool = True
    hop: float = 0.1

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("scene duration must be positive")
        object.__setattr__(self, "backgrounds", tuple(self.backgrounds))
        object.__setattr__(self, "events", tuple(self.events))

    @property
    def format(self) -> str:
        if isinstance(self.room, VirtualRoom):
            return self.room.format
        return "foa" if _load_db(self.room).format == "foa" else "mic"


_DB_CACHE: dict = {}


def _load_db(path) -> RirDatabase:
    key = str(Path(path).resolve())
    if key not in _DB_CACHE:
        _DB_CACHE[key] = load_rir_database(path)
    return _DB_CACHE[key]


def _rir_source(scene: SceneSpec):
    return scene.room if isinstance(scene.room, VirtualRoom) else _load_db(scene.room)


# ---------------------------------------------------------------------------
# resolved scene


@dataclass(frozen=True)
class ConcreteBackground:
    label: str
    source_file: str
    source_time: float
    placement: object            # "diffuse" or Vec3


@dataclass(frozen=True)
class ConcreteEvent:
    track: int
    label: str
    class_index: int
    source_file: str
    source_time: float
    onset: float
    duration: float
    snr: float
    trajectory: Trajectory
    pitch_shift: float | None = None
    time_stretch: float | None = None


@dataclass(frozen=True)
class ConcreteScene:
    spec: SceneSpec
    backgrounds: tuple
    events: tuple
    classes: tuple

    def to_dict(self) -> dict:
        s = self.spec
        room = s.room
        if isinstance(room, VirtualRoom):
            room_d = {
                "dims": list(room.room.dims),
                "reflection": room.room.reflection,
                "speed_of_sound": room.room.speed_of_sound,
                "array": room.array.name,
                "mic_center": list(room.array.center),
                "n_capsules": room.array.n_capsules,
                "format": room.format,
                "max_order": room.max_order,
            }
        else:
            room_d = {"database": str(room)}
        return {
            "duration": s.duration,
            "sample_rate": s.sample_rate,
            "ref_db": s.ref_db,
            "seed": s.seed,
            "room": room_d,
            "classes": list(self.classes),
            "backgrounds": [
                {**asdict(b), "placement": b.placement if b.placement == "diffuse" else list(b.placement)}
                for b in self.backgrounds
            ],
            "events": [
                {
                    "track": e.track,
                    "label": e.label,
                    "class_index": e.class_index,
                    "source_file": e.source_file,
                    "source_time": e.source_time,
                    "onset": e.onset,
                    "duration": e.duration,
                    "snr": e.snr,
                    "trajectory": {
                        "mode": e.trajectory.mode,
                        "waypoints": [list(w) for w in e.trajectory.waypoints],
                        "seed": e.trajectory.seed,
                    },
                    "pitch_shift": e.pitch_shift,
                    "time_stretch": e.time_stretch,
                }
                for e in self.events
            ],
        }


def _class_indices(scene: SceneSpec, labels) -> dict:
    if scene.label_map:
        return dict(scene.label_map)
    return {lab: i for i, lab in enumerate(sorted(labels))}


def _room_dims(scene: SceneSpec):
    """Walls of a virtual room; None for measured rooms, whose walls are unknown."""
    if isinstance(scene.room, VirtualRoom):
        return scene.room.room
    return None


def _pick_file(spec, label, corpus, root, rng):
    if label not in corpus:
        raise CorpusError(f"label {label!r} has no subdirectory in {root}")
    files = corpus[label]
    if spec.is_corpus_choice and not files:
        raise CorpusError(f"no WAV files under {Path(root) / label}")
    value = sample_distribution(spec, rng, [str(f) for f in files])
    p = Path(value)
    if not p.is_absolute() and not p.exists():
        p = Path(root) / label / p
    return str(p)


def _resolve_position(spec, room, rng, db=None):
    if spec is None or (isinstance(spec, DistributionSpec) and spec.is_corpus_choice):
        if room is None:
            return tuple(db.positions[int(rng.integers(len(db.positions)))])
        return random_position(room, rng)
    if isinstance(spec, DistributionSpec):
        return sample_distribution(spec, rng)
    return spec


def _event_rng(seed, kind, index):
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, kind, index])


def instantiate(scene: SceneSpec) -> ConcreteScene:
    """Resolve every distribution with RNG streams derived from ``scene.seed``."""
    fg = sio.scan_corpus(scene.fg_path)
    classes = _class_indices(scene, fg.keys())
    room = _room_dims(scene)
    db = None if room is not None else _load_db(scene.room)

    backgrounds = []
    if scene.backgrounds:
        if scene.bg_path is None:
            raise CorpusError("scene has backgrounds but no bg_path")
        bg = sio.scan_corpus(scene.bg_path)
        for i, b in enumerate(scene.backgrounds):
            rng = _event_rng(scene.seed, 0, i)
            label = sample_distribution(b.label, rng, sorted(bg))
            path = _pick_file(b.source_file, label, bg, scene.bg_path, rng)
            t0 = float(sample_distribution(b.source_time, rng))
            if isinstance(b.placement, str):
                if b.placement != "diffuse":
                    raise ValueError(f"unknown background placement {b.placement!r}")
                placement = "diffuse"
            else:
                placement = Vec3.of(_resolve_position(b.placement, room, rng, db))
                if room is not None and not room.contains(placement):
                    raise ValueError(f"background position {placement} outside the room")
            backgrounds.append(ConcreteBackground(label, path, t0, placement))

    events = []
    for i, ev in enumerate(scene.events):
        rng = _event_rng(scene.seed, 1, i)
        label = sample_distribution(ev.label, rng, sorted(fg))
        if label not in classes:
            raise CorpusError(f"label {label!r} missing from the class map")
        path = _pick_file(ev.source_file, label, fg, scene.fg_path, rng)
        info = sio.wav_info(path)
        t0 = min(max(float(sample_distribution(ev.source_time, rng)), 0.0), info.duration)
        stretch = float(sample_distribution(ev.time_stretch, rng)) if ev.time_stretch else None
        shift = float(sample_distribution(ev.pitch_shift, rng)) if ev.pitch_shift else None
        available = (info.duration - t0) * (stretch or 1.0)
        if ev.event_duration is None:
            dur = available
        else:
            dur = min(float(sample_distribution(ev.event_duration, rng)), available)
        dur = min(max(dur, 0.0), scene.duration)
        if ev.event_time is None:
            onset = float(rng.uniform(0.0, scene.duration - dur))
        else:
            onset = float(sample_distribution(ev.event_time, rng))
        onset = min(max(onset, 0.0), scene.duration)
        dur = min(dur, scene.duration - onset)
        # quantise to whole samples so audio and trajectory lengths agree exactly
        sr = scene.sample_rate
        onset = round(onset * sr) / sr
        dur = max(0, min(round(dur * sr), round(scene.duration * sr) - round(onset * sr))) / sr

        raw = ev.trajectory
        if isinstance(raw, (list, tuple)) and raw and isinstance(raw[0], str):
            raw = DistributionSpec.parse(raw)
        wps = _resolve_position(raw, room, rng, db)
        wps = np.atleast_2d(np.asarray(wps, dtype=float))
        mode = ev.trajectory_mode or ("static" if len(wps) == 1 else "linear")
        traj = Trajectory.from_waypoints(wps, dur, bounds=room.dims if room else None, mode=mode,
                                         seed=int(rng.integers(2**31)))
        events.append(ConcreteEvent(i, label, int(classes[label]), path, t0, onset, dur,
                                    float(sample_distribution(ev.snr, rng)), traj, shift, stretch))
    inverse = sorted(classes, key=classes.get)
    return ConcreteScene(scene, tuple(backgrounds), tuple(events), tuple(inverse))


# ---------------------------------------------------------------------------
# rendering


def load_source(path, sample_rate, start=0.0, seconds=None) -> AudioClip:
    """Mono excerpt of a corpus file, resampled to ``sample_rate``."""
    info = sio.wav_info(path)
    a = int(round(start * info.sample_rate))
    b = None if seconds is None else a + int(math.ceil(seconds * info.sample_rate)) + 1
    clip = sio.read_wav(path, a, b).mono()
    if clip.sample_rate != sample_rate:
        g = math.gcd(clip.sample_rate, sample_rate)
        y = resample_poly(clip.samples[0], sample_rate // g, clip.sample_rate // g)
        clip = AudioClip(y, sample_rate)
    return clip


def loop_to_length(x: np.ndarray, start: int, length: int, crossfade: int) -> np.ndarray:
    """Play ``x`` from ``start`` and loop the whole file until ``length`` samples,
    joining loops with an equal-power crossfade of ``crossfade`` samples."""
    if len(x) == 0:
        raise FormatError("cannot loop an empty signal")
    out = np.zeros(length)
    chunk = x[start:] if start < len(x) else x
    pos = 0
    xf = min(crossfade, len(x) // 2)
    theta = (np.arange(xf) + 0.5) / max(xf, 1) * (np.pi / 2)
    fade_in, fade_out = np.sin(theta), np.cos(theta)
    first = True
    while pos < length:
        seg = chunk.copy()
        if not first and xf:
            seg[:xf] *= fade_in
        m = min(len(seg), length - pos)
        out[pos : pos + m] += seg[:m]
        if pos + len(seg) >= length:
            break
        if xf:
            out[pos + len(seg) - xf : pos + len(seg)] *= fade_out
        pos += len(seg) - xf
        chunk = x
        first = False
    return out


def _event_signal(ev: ConcreteEvent, sr: int) -> AudioClip:
    n = int(round(ev.duration * sr))
    need = ev.duration / (ev.time_stretch or 1.0)
    clip = load_source(ev.source_file, sr, ev.source_time, need)
    if ev.time_stretch:
        clip = time_stretch(clip, ev.time_stretch)
    if ev.pitch_shift:
        clip = pitch_shift(clip, ev.pitch_shift)
    x = clip.samples[0][:n]
    return AudioClip(np.pad(x, (0, n - len(x))), sr)


@dataclass
class RenderedScene:
    audio: AudioClip
    labels: list
    normalization_gain: float
    concrete: ConcreteScene
    event_positions: dict = field(default_factory=dict)   # track -> [(time, Vec3)]


def _mic_center(scene: SceneSpec):
    if isinstance(scene.room, VirtualRoom):
        return scene.room.mic_center
    return _load_db(scene.room).mic_center


def render(scene: SceneSpec, concrete: ConcreteScene | None = None, normalize: bool = True) -> RenderedScene:
    """Synthesize audio and labels without touching the filesystem for outputs."""
    concrete = concrete or instantiate(scene)
    sr = scene.sample_rate
    source = _rir_source(scene)
    channels = source.channels
    n_total = int(round(scene.duration * sr))
    total_frames = math.ceil(round(scene.duration / FRAME_SECONDS, 9))
    center = _mic_center(scene)
    tracks = []

    for b in concrete.backgrounds:
        src = load_source(b.source_file, sr)
        start = min(int(round(b.source_time * sr)), max(src.length - 1, 0))
        looped = AudioClip(loop_to_length(src.samples[0], start, n_total, int(LOOP_CROSSFADE * sr)), sr)
        if b.placement == "diffuse":
            stem = AudioClip(np.repeat(looped.samples, channels, axis=0), sr)
        else:
            rir, _ = rir_at(source, b.placement)
            stem = AudioClip(convolve(looped, rir).samples[:, :n_total], sr)
        tracks.append((scale_to_snr(stem, scene.ref_db, 0.0), 0.0))

    labels = []
    positions = {}
    for ev in concrete.events:
        if ev.duration <= 0:
            continue
        dry = _event_signal(ev, sr)
        if not np.any(dry.samples):
            continue
        wet, pos = render_moving(dry, ev.trajectory, source, scene.hop)
        tracks.append((scale_to_snr(wet, scene.ref_db, ev.snr), ev.onset))
        positions[ev.track] = pos
        for f in active_frames(ev.onset, ev.duration, total_frames):
            mid = (f + 0.5) * FRAME_SECONDS - ev.onset
            k = min(max(int(mid // scene.hop), 0), len(pos) - 1)
            az, el, dist = cartesian_to_spherical(pos[k][1], center)
            az_i = int(round(az))
            if az_i >= 180:
                az_i -= 360
            labels.append(AnnotationFrame(f, ev.class_index, ev.track, az_i, int(round(el)),
                                          int(round(dist * 100))))

    audio = mix(tracks, scene.duration, sr, channels)
    gain = 1.0
    if normalize:
        audio, gain = normalize_peak(audio)
    return RenderedScene(audio, sort_frames(labels), gain, concrete, positions)


def _dest_stem(dest_path) -> Path:
    p = Path(dest_path)
    return p.with_suffix("") if p.suffix.lower() in (".wav", ".csv", ".json") else p


def generate(scene: SceneSpec, dest_path):
    """Render ``scene`` and write ``<dest>.wav``, ``<dest>.csv`` and ``<dest>.json``."""
    stem = _dest_stem(dest_path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    result = render(scene)
    wav = sio.write_wav(stem.with_suffix(".wav"), result.audio)
    csv = sio.write_dcase_csv(stem.with_suffix(".csv"), result.labels, scene.with_distance)
    prov = result.concrete.to_dict()
    prov["normalization_gain"] = result.normalization_gain
    js = stem.with_suffix(".json")
    js.write_text(json.dumps(prov, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return wav, csv, js


# ---------------------------------------------------------------------------
# config dictionaries and a builder API


def _dist_or_none(v):
    return None if v is None else DistributionSpec.parse(v)


def _event_from_dict(d) -> EventSpec:
    kw = {}
    for key in ("label", "source_file", "source_time", "snr"):
        if key in d:
            kw[key] = DistributionSpec.parse(d[key])
    for key in ("event_time", "event_duration", "pitch_shift", "time_stretch"):
        if key in d:
            kw[key] = _dist_or_none(d[key])
    if "trajectory" in d:
        t = d["trajectory"]
        kw["trajectory"] = DistributionSpec.parse(t) if t and isinstance(t[0], str) else _freeze(t)
    if "trajectory_mode" in d:
        kw["trajectory_mode"] = d["trajectory_mode"]
    return EventSpec(**kw)


def _background_from_dict(d) -> BackgroundSpec:
    kw = {}
    for key in ("label", "source_file", "source_time"):
        if key in d:
            kw[key] = DistributionSpec.parse(d[key])
    if "placement" in d:
        p = d["placement"]
        kw["placement"] = p if isinstance(p, str) else (
            DistributionSpec.parse(p) if isinstance(p[0], str) else tuple(p))
    return BackgroundSpec(**kw)


def room_from_dict(d, sample_rate=24000, fmt="foa", base_dir=None):
    """Virtual room (RoomSpec + MicArray) or a database path from a config mapping."""
    if "database" in d:
        p = Path(d["database"])
        return p if p.is_absolute() or base_dir is None else Path(base_dir) / p
    beta = d.get("reflection", d.get("decay", 0.8))
    room = RoomSpec(tuple(d["dims"]), beta, d.get("speed_of_sound", 343.0))
    mic = d["mic"]
    if "capsules" in mic:
        array = MicArray.from_offsets(mic["center"], mic["capsules"], mic.get("directivity", "omni"))
    else:
        array = MicArray.preset(mic.get("preset", "tetra"), mic["center"], mic.get("directivity", "cardioid"))
    return VirtualRoom(room, array, fmt, sample_rate, d.get("max_order"))


def scene_from_dict(doc, base_dir=None, **overrides) -> SceneSpec:
    """Build a SceneSpec from a (schema-valid) config mapping."""
    doc = {**doc, **{k: v for k, v in overrides.items() if v is not None}}
    sr = doc.get("sample_rate", 24000)
    errors = []

    def resolve(p):
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() or base_dir is None else Path(base_dir) / p

    try:
        room = room_from_dict(doc["room"], sr, doc.get("format", "foa"), base_dir)
    except (ValueError, KeyError) as e:
        errors.append(("/room", str(e)))
        room = None
    try:
        events = tuple(_event_from_dict(e) for e in doc.get("events", []))
        bgs = tuple(_background_from_dict(b) for b in doc.get("backgrounds", []))
    except (ValueError, TypeError) as e:
        errors.append(("/events", str(e)))
    if errors:
        raise SchemaError(errors)
    return SceneSpec(
        duration=float(doc["duration"]),
        room=room,
        fg_path=resolve(doc["fg_path"]),
        bg_path=resolve(doc.get("bg_path")),
        ref_db=float(doc["ref_db"]),
        seed=int(doc.get("seed", 0)),
        backgrounds=bgs,
        events=events,
        sample_rate=sr,
        label_map=doc.get("label_map"),
        with_distance=doc.get("with_distance", True),
        hop=doc.get("hop", 0.1),
    )


class Scaper:
    """Incremental builder mirroring the scaper-style calls.

    >>> vroom = VirtualRoom(RoomSpec((5, 3, 2), 0.8), MicArray.preset("em32", (2.5, 2.5, 0.5)))
    >>> ssc = Scaper(60, vroom, "fg", "bg", ref_db=-50)           # doctest: +SKIP
    >>> ssc.add_background(label=("const", "back"))              # doctest: +SKIP
    >>> ssc.add_event(event_xyz=("const", [[4.0, 0.1, 0.2], [4.5, 0.1, 1.9]]))  # doctest: +SKIP
    >>> ssc.generate("out/rs1.wav")                              # doctest: +SKIP
    """

    def __init__(self, duration, room, fg_path, bg_path=None, ref_db=-50.0, seed=0, **kw):
        self.spec = SceneSpec(duration, room, Path(fg_path), Path(bg_path) if bg_path else None,
                              ref_db, seed, **kw)

    def add_background(self, label=("choose", []), source_file=("choose", []), source_time=("const", 0),
                       position=None):
        placement = "diffuse" if position is None else (
            DistributionSpec.parse(position) if isinstance(position[0], str) else tuple(position))
        bg = BackgroundSpec(DistributionSpec.parse(label), DistributionSpec.parse(source_file),
                            DistributionSpec.parse(source_time), placement)
        self.spec = replace(self.spec, backgrounds=self.spec.backgrounds + (bg,))
        return bg

    def add_event(self, label=("choose", []), source_file=("choose", []), source_time=("const", 0),
                  event_time=None, event_duration=None, snr=("uniform", *DEFAULT_SNR), event_xyz=None,
                  trajectory_mode=None, pitch_shift=None, time_stretch=None):
        d = {"label": list(label), "source_file": list(source_file), "source_time": list(source_time),
             "snr": list(snr), "trajectory_mode": trajectory_mode}
        for key, val in (("event_time", event_time), ("event_duration", event_duration),
                         ("pitch_shift", pitch_shift), ("time_stretch", time_stretch)):
            if val is not None:
                d[key] = list(val) if isinstance(val, (list, tuple)) else val
        if event_xyz is not None:
            d["trajectory"] = list(event_xyz)
        if trajectory_mode is None:
            d.pop("trajectory_mode")
        ev = _event_from_dict(d)
        self.spec = replace(self.spec, events=self.spec.events + (ev,))
        return ev

    def generate(self, dest_path):
        return generate(self.spec, dest_path)
