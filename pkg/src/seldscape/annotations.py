"""Strong labels in the DCASE SELD layout (one row per active 100 ms frame)."""

from __future__ import annotations

import math
from collections import Counter
from typing import NamedTuple

FRAME_SECONDS = 0.1


class AnnotationFrame(NamedTuple):
    frame: int
    class_index: int
    track_index: int
    azimuth: int
    elevation: int
    distance: int | None = None

    def sort_key(self):
        return (self.frame, self.class_index, self.track_index)


def _frame_count(seconds: float, hop: float) -> float:
    # snap values within 1e-9 frames of an integer so 3.0/0.1 is exactly 30
    x = seconds / hop
    r = round(x)
    return float(r) if abs(x - r) < 1e-9 else x


def active_frames(onset: float, duration: float, total_frames: int | None = None,
                  hop: float = FRAME_SECONDS) -> list[int]:
    """Frames labelled active for an event spanning ``[onset, onset + duration)``.

    A frame is active when at least half of it overlaps the event; the frames
    holding the event's first and last instants are always active.
    """
    if duration <= 0:
        return []
    start = _frame_count(onset, hop)
    end = _frame_count(onset + duration, hop)
    first = math.floor(start)
    last = math.ceil(end) - 1
    frames = []
    for f in range(first, last + 1):
        overlap = min(f + 1, end) - max(f, start)
        if f in (first, last) or overlap >= 0.5 - 1e-9:
            frames.append(f)
    if total_frames is not None:
        frames = [f for f in frames if 0 <= f < total_frames]
    return frames


def sort_frames(frames):
    return sorted(frames, key=AnnotationFrame.sort_key)


def split_events(frames):
    """Group rows into events: maximal runs of consecutive frames per (class, track)."""
    by_key = {}
    for fr in sort_frames(frames):
        by_key.setdefault((fr.class_index, fr.track_index), []).append(fr)
    events = []
    for (cls, trk), rows in sorted(by_key.items()):
        run = [rows[0]]
        for r in rows[1:]:
            if r.frame == run[-1].frame + 1:
                run.append(r)
            else:
                events.append(run)
                run = [r]
        events.append(run)
    return events


def polyphony(frames) -> Counter:
    """Number of active tracks per frame index."""
    return Counter(fr.frame for fr in frames)
