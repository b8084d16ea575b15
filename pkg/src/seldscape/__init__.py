"""Spatial soundscape synthesis for sound event localization and detection data."""

__version__ = "0.1.0"

from .ambisonics import doa_estimate, encode_capsules_to_foa, sh_gains
from .audio import AudioClip
from .augment import (
    SwapPattern,
    apply_augmentation,
    channel_swap,
    remix,
    rotate_soundscape,
    tf_mask,
)
from .composer import (
    BackgroundSpec,
    DistributionSpec,
    EventSpec,
    Scaper,
    SceneSpec,
    generate,
    instantiate,
    sample_distribution,
)
from .geometry import MicArray, RoomSpec, Trajectory, Vec3, cartesian_to_spherical, sample_trajectory
from .rir import (
    Rir,
    RirDatabase,
    enumerate_images,
    estimate_t60,
    load_rir_database,
    nearest_rir,
    synth_foa_rir,
    synth_rir,
)
from .spatializer import VirtualRoom, convolve, mix, pitch_shift, render_moving, scale_to_snr, time_stretch
