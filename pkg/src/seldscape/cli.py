"""Command-line interface: ``seldscape {generate,augment,rir,inspect}``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import io as sio
from .annotations import FRAME_SECONDS, polyphony, split_events
from .augment import SUFFIXES, apply_augmentation
from .errors import AnalysisError, LayoutError, SchemaError, SeldscapeError

log = logging.getLogger("seldscape")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _emit(args, summary: dict, text: str):
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        print(text)


def _xyz(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,z but got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z but got {text!r}")
    return vals


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


# ---------------------------------------------------------------------------
# generate


def _generate_one(config, out_dir, index, seed, fmt, prefix):
    # runs in worker processes: keep arguments plain and picklable
    from .composer import generate

    name = f"{prefix}{index:03d}"
    try:
        scene = sio.parse_scene_config(config, seed=seed, format=fmt)
        paths = generate(scene, Path(out_dir) / name)
        outputs = [{"path": p.name, "sha256": _sha256(p)} for p in paths]
        return {"index": index, "name": name, "seed": seed, "status": "ok", "outputs": outputs}
    except Exception as e:  # noqa: BLE001 - reported per file in the manifest
        return {"index": index, "name": name, "seed": seed, "status": "error",
                "error": f"{type(e).__name__}: {e}", "outputs": []}


def cmd_generate(args) -> int:
    t0 = time.perf_counter()
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as e:
        print(f"error: output directory {out} is not writable: {e}", file=sys.stderr)
        return EXIT_FAILURE
    try:
        scene = sio.parse_scene_config(args.config)
    except SchemaError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, SeldscapeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    base_seed = scene.seed if args.seed is None else args.seed
    jobs = [(str(args.config), str(out), i, base_seed + i, args.format, args.prefix) for i in range(args.count)]

    results = []
    n_workers = max(1, args.jobs or os.cpu_count() or 1)
    if n_workers == 1 or args.count == 1:
        for job in jobs:
            results.append(_generate_one(*job))
            print(f"[{len(results)}/{args.count}] {results[-1]['name']}: {results[-1]['status']}", file=sys.stderr)
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(_generate_one, *job) for job in jobs]
            for k, fut in enumerate(futures, start=1):
                results.append(fut.result())
                print(f"[{k}/{args.count}] {results[-1]['name']}: {results[-1]['status']}", file=sys.stderr)
    results.sort(key=lambda r: r["index"])

    failed = [r for r in results if r["status"] != "ok"]
    manifest = {
        "tool": "seldscape",
        "version": __version__,
        "command": sys.argv if args.argv is None else args.argv,
        "base_seed": base_seed,
        "count": args.count,
        "format": args.format or scene.format,
        "files": results,
        "wall_clock_seconds": round(time.perf_counter() - t0, 3),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    for r in failed:
        print(f"error: {r['name']}: {r['error']}", file=sys.stderr)
    summary = {"generated": len(results) - len(failed), "failed": len(failed), "manifest": str(out / "manifest.json")}
    _emit(args, summary, f"{summary['generated']} generated, {summary['failed']} failed")
    return EXIT_OK if not failed else EXIT_FAILURE


# ---------------------------------------------------------------------------
# augment

_AUG_CHOICES = sorted(SUFFIXES)


def cmd_augment(args) -> int:
    params = {"seed": args.seed}
    if args.patterns:
        params["patterns"] = args.patterns
    for key in ("yaw", "n_time_masks", "n_freq_masks", "max_time", "max_freq", "max_polyphony"):
        val = getattr(args, key)
        if val is not None:
            params[key] = val
    try:
        summary = apply_augmentation(args.input, args.aug, params, args.output)
    except (LayoutError, FileNotFoundError, SeldscapeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    for csv, why in summary.skipped:
        print(f"warning: skipped {csv}: {why}", file=sys.stderr)
    out = {
        "output": str(summary.output_root),
        "processed": summary.processed,
        "skipped": len(summary.skipped),
        "outputs": len(summary.outputs),
    }
    _emit(args, out, summary.line())
    return EXIT_OK if not summary.skipped else EXIT_FAILURE


# ---------------------------------------------------------------------------
# rir


def _load_room_arg(text):
    p = Path(text)
    if p.exists():
        return json.loads(p.read_text(encoding="utf-8"))
    return json.loads(text)


def cmd_rir(args) -> int:
    from .composer import room_from_dict
    from .rir import estimate_t60, synth_foa_rir, synth_rir

    try:
        doc = _load_room_arg(args.room)
    except (json.JSONDecodeError, OSError) as e:
        print(f"error: cannot read room spec: {e}", file=sys.stderr)
        return EXIT_USAGE
    doc.setdefault("mic", {"preset": "omni", "center": doc.get("mic_center", [d / 2 for d in doc["dims"]])})
    doc.pop("mic_center", None)
    fmt = doc.pop("format", "mic")
    try:
        vroom = room_from_dict(doc, args.sample_rate, fmt)
        order = args.order
        if fmt == "foa":
            rir = synth_foa_rir(vroom.room, args.source, vroom.mic_center, args.sample_rate, order)
        else:
            rir = synth_rir(vroom.room, args.source, vroom.array, args.sample_rate, order)
    except (SeldscapeError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    sio.write_wav(args.out, rir.as_clip())
    dist = float(np.linalg.norm(np.asarray(args.source) - vroom.mic_center.array()))
    delay_ms = dist / vroom.room.speed_of_sound * 1e3
    try:
        t60 = estimate_t60(rir)
        t60_text = f"{t60:.3f} s"
    except AnalysisError:
        t60 = None
        t60_text = "anechoic (insufficient decay)"
    if args.plot:
        from .plotting import plot_rir

        plot_rir(rir, args.plot, t60)
    summary = {
        "out": str(args.out),
        "channels": rir.channels,
        "length": rir.length,
        "t60": t60,
        "sabine_t60": vroom.room.sabine_t60(),
        "direct_path_delay_ms": delay_ms,
    }
    _emit(args, summary,
          f"wrote {args.out} ({rir.channels} ch, {rir.length} taps)\n"
          f"T60: {t60_text}\n"
          f"direct-path delay: {delay_ms:.3f} ms")
    return EXIT_OK


# ---------------------------------------------------------------------------
# inspect


def inspect_dataset(path):
    """Per-class event counts, frame polyphony histogram and pairing report."""
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory {root} does not exist")
    if not (root / "metadata").is_dir():
        if any(p.suffix.lower() in (".wav", ".csv") for p in root.rglob("*")):
            raise LayoutError(f"{root}: missing 'metadata' subdirectory")
        pairs, skipped = [], []
    else:
        index = sio.scan_dataset(root)
        pairs, skipped = index.pairs, index.skipped
    class_counts = Counter()
    histogram = Counter()
    for csv, wav, _ in pairs:
        rows = sio.read_dcase_csv(csv)
        for ev in split_events(rows):
            class_counts[ev[0].class_index] += 1
        poly = polyphony(rows)
        n_frames = max(poly, default=-1) + 1
        n_frames = max(n_frames, int(round(sio.wav_info(wav).duration / FRAME_SECONDS)))
        for f in range(n_frames):
            histogram[poly.get(f, 0)] += 1
    return {
        "pairs": len(pairs),
        "skipped": [{"csv": str(c), "reason": why} for c, why in skipped],
        "class_counts": {str(k): v for k, v in sorted(class_counts.items())},
        "polyphony_histogram": {str(k): v for k, v in sorted(histogram.items())},
    }


def cmd_inspect(args) -> int:
    try:
        report = inspect_dataset(args.input)
    except (LayoutError, FileNotFoundError, SeldscapeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    if args.report:
        from .plotting import plot_class_counts, plot_polyphony

        rdir = Path(args.report)
        rdir.mkdir(parents=True, exist_ok=True)
        with open(rdir / "class_counts.csv", "w", newline="\n") as f:
            f.write("class,events\n")
            f.writelines(f"{k},{v}\n" for k, v in report["class_counts"].items())
        with open(rdir / "polyphony.csv", "w", newline="\n") as f:
            f.write("active_tracks,frames\n")
            f.writelines(f"{k},{v}\n" for k, v in report["polyphony_histogram"].items())
        plot_class_counts({int(k): v for k, v in report["class_counts"].items()}, rdir / "class_counts.png")
        plot_polyphony({int(k): v for k, v in report["polyphony_histogram"].items()}, rdir / "polyphony.png")
    lines = [f"pairs: {report['pairs']}, skipped: {len(report['skipped'])}"]
    lines.append("events per class: " + (", ".join(f"{k}={v}" for k, v in report["class_counts"].items()) or "none"))
    lines.append("frames by active tracks: "
                 + (", ".join(f"{k}={v}" for k, v in report["polyphony_histogram"].items()) or "none"))
    lines += [f"skipped {s['csv']}: {s['reason']}" for s in report["skipped"]]
    _emit(args, report, "\n".join(lines))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seldscape", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="render soundscapes from a scene config")
    g.add_argument("--config", required=True, help="scene JSON file")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--seed", type=int, default=None, help="base seed; file i uses seed+i (default: config seed)")
    g.add_argument("--format", choices=["foa", "mic"], default=None)
    g.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    g.add_argument("--prefix", default="mix")
    g.add_argument("--json", action="store_true", help="print a JSON summary to stdout")
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("augment", help="augment an existing SELD dataset")
    a.add_argument("--input", required=True, help="dataset root with a metadata/ subdirectory")
    a.add_argument("--aug", required=True, choices=_AUG_CHOICES)
    a.add_argument("--output", default=None, help="output root (default: <input>_<suffix>)")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--patterns", type=_int_list, default=None, help="channel-swap pattern indices, e.g. 1,2")
    a.add_argument("--yaw", type=float, default=None, help="rotation in degrees (default: random per file)")
    a.add_argument("--n-time-masks", type=int, default=None)
    a.add_argument("--n-freq-masks", type=int, default=None)
    a.add_argument("--max-time", type=float, default=None, help="seconds")
    a.add_argument("--max-freq", type=float, default=None, help="Hz")
    a.add_argument("--max-polyphony", type=int, default=None)
    a.add_argument("--json", action="store_true")
    a.set_defaults(func=cmd_augment)

    r = sub.add_parser("rir", help="synthesize one room impulse response")
    r.add_argument("--room", required=True, help="room JSON (file path or inline)")
    r.add_argument("--source", required=True, type=_xyz, help="x,y,z in meters")
    r.add_argument("--out", required=True, help="output WAV")
    r.add_argument("--order", type=int, default=None, help="max reflection order (default: automatic)")
    r.add_argument("--sample-rate", type=int, default=24000)
    r.add_argument("--plot", default=None, help="write an impulse-response/decay figure (PNG)")
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_rir)

    i = sub.add_parser("inspect", help="summarize a SELD dataset")
    i.add_argument("--input", required=True)
    i.add_argument("--report", default=None, help="directory for CSV tables and figures")
    i.add_argument("--json", action="store_true")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    args.argv = None if argv is None else ["seldscape", *argv]
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
