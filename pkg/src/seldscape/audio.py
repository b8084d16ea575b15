"""Sample-rate-tagged multichannel audio container."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Multichannel audio held as a ``(channels, length)`` float array.

    One-dimensional input is promoted to a single channel.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2:
            raise ValueError(f"samples must be 1-D or 2-D, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples contain non-finite values")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.length / self.sample_rate

    def with_samples(self, samples) -> "AudioClip":
        return AudioClip(samples, self.sample_rate)

    def mono(self) -> "AudioClip":
        """Average all channels into one."""
        return AudioClip(self.samples.mean(axis=0, keepdims=True), self.sample_rate)

    @classmethod
    def silence(cls, channels, length, sample_rate):
        return cls(np.zeros((channels, length)), sample_rate)
