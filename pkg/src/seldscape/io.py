"""File formats: WAV audio, DCASE label CSVs, scene configs, corpora and datasets."""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .annotations import AnnotationFrame, sort_frames
from .audio import AudioClip
from .errors import FormatError, LayoutError, ParseError, SchemaError

_PCM = 0x0001
_IEEE_FLOAT = 0x0003
_EXTENSIBLE = 0xFFFE


# ---------------------------------------------------------------------------
# WAV


@dataclass(frozen=True)
class WavInfo:
    sample_rate: int
    channels: int
    frames: int
    format_tag: int
    bits: int
    data_offset: int

    @property
    def duration(self) -> float:
        return self.frames / self.sample_rate


def _parse_header(f, path) -> WavInfo:
    head = f.read(12)
    if len(head) < 12 or head[:4] != b"RIFF" or head[8:12] != b"WAVE":
        raise FormatError(f"{path}: not a RIFF/WAVE file (byte offset 0)")
    fmt = None
    offset = 12
    while True:
        f.seek(offset)
        ch = f.read(8)
        if len(ch) < 8:
            raise FormatError(f"{path}: no data chunk found (byte offset {offset})")
        cid, size = ch[:4], struct.unpack("<I", ch[4:])[0]
        if cid == b"fmt ":
            body = f.read(size)
            if size < 16 or len(body) < 16:
                raise FormatError(f"{path}: truncated fmt chunk (byte offset {offset})")
            tag, channels, rate, _, block, bits = struct.unpack("<HHIIHH", body[:16])
            if tag == _EXTENSIBLE:
                if size < 40:
                    raise FormatError(f"{path}: truncated extensible fmt chunk (byte offset {offset})")
                tag = struct.unpack("<H", body[24:26])[0]
            if channels == 0 or rate == 0:
                raise FormatError(f"{path}: zero channels or sample rate (byte offset {offset + 8})")
            if block != channels * (bits // 8):
                raise FormatError(f"{path}: inconsistent block alignment (byte offset {offset + 20})")
            fmt = (tag, channels, rate, bits)
        elif cid == b"data":
            if fmt is None:
                raise FormatError(f"{path}: data chunk before fmt chunk (byte offset {offset})")
            tag, channels, rate, bits = fmt
            supported = (tag == _PCM and bits in (8, 16, 24, 32)) or (tag == _IEEE_FLOAT and bits in (32, 64))
            if not supported:
                raise FormatError(f"{path}: unsupported encoding tag={tag} bits={bits}")
            f.seek(0, os.SEEK_END)
            available = f.tell() - (offset + 8)
            if size > available:
                raise FormatError(
                    f"{path}: data chunk declares {size} bytes but only {available} remain (byte offset {offset + 4})"
                )
            frames = size // (channels * bits // 8)
            return WavInfo(rate, channels, frames, tag, bits, offset + 8)
        offset += 8 + size + (size & 1)


def wav_info(path) -> WavInfo:
    with open(path, "rb") as f:
        return _parse_header(f, path)


def read_wav(path, start: int = 0, stop: int | None = None) -> AudioClip:
    """Read PCM or IEEE-float WAV as floats; integer PCM is scaled by 1/2^(bits-1)."""
    with open(path, "rb") as f:
        info = _parse_header(f, path)
        stop = info.frames if stop is None else min(stop, info.frames)
        start = min(max(start, 0), stop)
        width = info.bits // 8
        f.seek(info.data_offset + start * info.channels * width)
        raw = f.read((stop - start) * info.channels * width)
    n = stop - start
    if info.format_tag == _IEEE_FLOAT:
        data = np.frombuffer(raw, dtype="<f4" if info.bits == 32 else "<f8").astype(np.float64)
    elif info.bits == 8:
        data = (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif info.bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v >= 1 << 23, v - (1 << 24), v)
        data = v / float(1 << 23)
    else:
        dt = "<i2" if info.bits == 16 else "<i4"
        data = np.frombuffer(raw, dtype=dt).astype(np.float64) / float(1 << (info.bits - 1))
    return AudioClip(data.reshape(n, info.channels).T, info.sample_rate)


def write_wav(path, clip: AudioClip, encoding: str = "float32"):
    """Write ``clip`` as float32 (lossless for float32 data) or int16 PCM."""
    x = clip.samples.T
    if encoding == "float32":
        payload = np.ascontiguousarray(x, dtype="<f4").tobytes()
        tag, bits = _IEEE_FLOAT, 32
        fmt = struct.pack("<HHIIHHH", tag, clip.channels, clip.sample_rate,
                          clip.sample_rate * clip.channels * 4, clip.channels * 4, bits, 0)
        extra = b"fact" + struct.pack("<II", 4, clip.length)
    elif encoding == "int16":
        q = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
        payload = np.ascontiguousarray(q).tobytes()
        tag, bits = _PCM, 16
        fmt = struct.pack("<HHIIHH", tag, clip.channels, clip.sample_rate,
                          clip.sample_rate * clip.channels * 2, clip.channels * 2, bits)
        extra = b""
    else:
        raise ValueError(f"unsupported encoding {encoding!r}")
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + extra
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        body += b"\x00"
    path = Path(path)
    with open(path, "wb") as f:
        f.write(b"RIFF" + struct.pack("<I", len(body)) + body)
    return path


# ---------------------------------------------------------------------------
# DCASE CSV


def write_dcase_csv(path, frames, with_distance: bool = True):
    lines = []
    for fr in sort_frames(frames):
        fields = [fr.frame, fr.class_index, fr.track_index, fr.azimuth, fr.elevation]
        if with_distance:
            if fr.distance is None:
                raise FormatError(f"frame {fr.frame} has no distance but with_distance is set")
            fields.append(fr.distance)
        lines.append(",".join(str(int(v)) for v in fields) + "\n")
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("".join(lines))
    return path


def read_dcase_csv(path) -> list[AnnotationFrame]:
    """Parse a DCASE label file; 5 or 6 integer columns, detected from the first row."""
    rows = []
    ncols = None
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if ncols is None:
                ncols = len(parts)
                if ncols not in (5, 6):
                    raise ParseError(f"expected 5 or 6 columns, got {ncols}", path, lineno)
            elif len(parts) != ncols:
                raise ParseError(f"expected {ncols} columns, got {len(parts)}", path, lineno)
            try:
                vals = [int(p) for p in parts]
            except ValueError:
                raise ParseError(f"non-integer field in {line!r}", path, lineno) from None
            rows.append(AnnotationFrame(*vals) if ncols == 6 else AnnotationFrame(*vals, None))
    return rows


# ---------------------------------------------------------------------------
# corpora and datasets


def _wavs_under(root: Path):
    return sorted(p for p in root.rglob("*") if p.suffix.lower() == ".wav" and p.is_file())


def scan_corpus(path) -> dict[str, list[Path]]:
    """Map each immediate subdirectory (class label) to the WAVs found beneath it."""
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus directory {root} does not exist")
    return {d.name: _wavs_under(d) for d in sorted(root.iterdir()) if d.is_dir()}


@dataclass
class DatasetIndex:
    root: Path
    pairs: list = field(default_factory=list)      # (csv_path, wav_path, basename)
    skipped: list = field(default_factory=list)    # (csv_path, reason)


def scan_dataset(path) -> DatasetIndex:
    """Pair ``metadata/**/*.csv`` files with same-basename WAVs anywhere under the root."""
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory {root} does not exist")
    meta = root / "metadata"
    if not meta.is_dir():
        raise LayoutError(f"{root}: missing 'metadata' subdirectory")
    wavs = {}
    for w in _wavs_under(root):
        if meta in w.parents:
            continue
        wavs.setdefault(w.stem, []).append(w)
    index = DatasetIndex(root)
    seen = set()
    for csv in sorted(meta.rglob("*.csv")):
        name = csv.stem
        if name in seen:
            index.skipped.append((csv, "duplicate basename"))
            continue
        seen.add(name)
        match = wavs.get(name, [])
        if not match:
            index.skipped.append((csv, "no matching WAV"))
        elif len(match) > 1:
            index.skipped.append((csv, f"{len(match)} WAVs share this basename"))
        else:
            index.pairs.append((csv, match[0], name))
    return index


# ---------------------------------------------------------------------------
# scene config

_DIST = {
    "type": "array",
    "minItems": 2,
    "prefixItems": [{"enum": ["const", "choose", "uniform", "normal"]}],
}
_NUM_DIST = {"oneOf": [{"type": "number"}, _DIST]}
_XYZ = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}

SCENE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["duration", "room", "fg_path", "ref_db"],
    "additionalProperties": False,
    "properties": {
        "duration": {"type": "number", "exclusiveMinimum": 0},
        "sample_rate": {"type": "integer", "minimum": 1},
        "format": {"enum": ["foa", "mic"]},
        "fg_path": {"type": "string"},
        "bg_path": {"type": ["string", "null"]},
        "ref_db": {"type": "number"},
        "seed": {"type": "integer"},
        "with_distance": {"type": "boolean"},
        "hop": {"type": "number", "exclusiveMinimum": 0},
        "label_map": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 0}},
        "room": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["database"],
                    "additionalProperties": False,
                    "properties": {"database": {"type": "string"}},
                },
                {
                    "type": "object",
                    "required": ["dims", "mic"],
                    "additionalProperties": False,
                    "properties": {
                        "dims": {**_XYZ, "items": {"type": "number", "exclusiveMinimum": 0}},
                        "decay": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                        "reflection": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                        "speed_of_sound": {"type": "number", "exclusiveMinimum": 0},
                        "max_order": {"type": ["integer", "null"], "minimum": 0},
                        "mic": {
                            "type": "object",
                            "required": ["center"],
                            "additionalProperties": False,
                            "properties": {
                                "center": _XYZ,
                                "preset": {"type": "string"},
                                "capsules": {"type": "array", "items": _XYZ, "minItems": 1},
                                "directivity": {"enum": ["omni", "cardioid"]},
                            },
                        },
                    },
                },
            ]
        },
        "backgrounds": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "label": _DIST,
                    "source_file": _DIST,
                    "source_time": _NUM_DIST,
                    "placement": {"oneOf": [{"const": "diffuse"}, _XYZ, _DIST]},
                },
            },
        },
        "events": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "label": _DIST,
                    "source_file": _DIST,
                    "source_time": _NUM_DIST,
                    "event_time": _NUM_DIST,
                    "event_duration": _NUM_DIST,
                    "snr": _NUM_DIST,
                    "trajectory": {"type": "array"},
                    "trajectory_mode": {"enum": ["static", "linear", "spline", "random_walk"]},
                    "pitch_shift": {"oneOf": [{"type": "null"}, _NUM_DIST]},
                    "time_stretch": {"oneOf": [{"type": "null"}, _NUM_DIST]},
                },
            },
        },
    },
}


def _pointer(path_parts) -> str:
    return "".join("/" + str(p).replace("~", "~0").replace("/", "~1") for p in path_parts)


def parse_scene_config(path, corpus_root=None, **overrides):
    """Validate a scene JSON file and build a :class:`~seldscape.composer.SceneSpec`.

    All schema violations are collected and raised together as a SchemaError.
    Relative corpus and database paths resolve against ``corpus_root`` (or the
    ``SELDSCAPE_CORPUS_ROOT`` environment variable), else the config's directory.
    Keyword overrides (``seed``, ``format``) replace top-level config values.
    """
    import jsonschema

    from .composer import scene_from_dict

    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaError([("", f"invalid JSON: {e}")]) from None
    validator = jsonschema.Draft202012Validator(SCENE_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    violations = [(_pointer(e.absolute_path), e.message) for e in errors]
    if violations:
        raise SchemaError(violations)
    root = corpus_root or os.environ.get("SELDSCAPE_CORPUS_ROOT") or path.parent
    return scene_from_dict(doc, base_dir=Path(root), **overrides)
