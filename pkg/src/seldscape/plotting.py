"""Report figures written next to the CLI's delimited outputs."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .rir import energy_decay_curve  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 120,
    "figure.figsize": (6.4, 3.6),
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_class_counts(counts, path, class_names=None):
    """Bar chart of events per class index."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        keys = sorted(counts)
        labels = [class_names.get(k, str(k)) if class_names else str(k) for k in keys]
        ax.bar(range(len(keys)), [counts[k] for k in keys], color="C0")
        ax.set_xticks(range(len(keys)), labels)
        ax.set_xlabel("class")
        ax.set_ylabel("events")
        ax.set_title("events per class")
        return _save(fig, path)


def plot_polyphony(histogram, path):
    """Frames per number of simultaneously active tracks."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        keys = sorted(histogram)
        ax.bar(keys, [histogram[k] for k in keys], color="C1")
        ax.set_xticks(keys)
        ax.set_xlabel("active tracks")
        ax.set_ylabel("frames")
        ax.set_title("frame activity")
        return _save(fig, path)


def plot_rir(rir, path, t60=None):
    """Channel-0 impulse response and its Schroeder decay curve."""
    h = rir.taps[0]
    t = np.arange(len(h)) / rir.sample_rate * 1e3
    edc = energy_decay_curve(h)
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 5.0))
        a1.plot(t, h, lw=0.6)
        a1.set_ylabel("amplitude")
        a2.plot(t, np.maximum(edc, -100), lw=1.0, color="C3")
        a2.axhline(-60, ls="--", lw=0.8, color="0.5")
        a2.set_ylabel("energy decay (dB)")
        a2.set_xlabel("time (ms)")
        if t60 is not None:
            a2.set_title(f"T60 = {t60:.3f} s", fontsize=9)
        return _save(fig, path)
