import math

import numpy as np
import pytest

from seldscape.ambisonics import (
    angular_distance,
    doa_estimate,
    encode_capsules_to_foa,
    encode_plane_wave,
    encoding_matrix,
    sh_gains,
)
from seldscape.audio import AudioClip
from seldscape.errors import ConditioningError, FormatError, NoEstimateError, RangeError
from seldscape.geometry import MicArray

SR = 24000
TETRA = [(45, 35), (-45, -35), (135, -35), (-135, 35)]


def _noise(n=4800, seed=0):
    return np.random.default_rng(seed).standard_normal(n)


@pytest.mark.parametrize("az,el,expected", [
    (0, 0, (1, 0, 0, 1)),
    (90, 0, (1, 1, 0, 0)),
    (0, 90, (1, 0, 1, 0)),
])
def test_axis_gains_exact(az, el, expected):
    assert tuple(sh_gains(az, el)) == pytest.approx(expected, abs=1e-15)


def test_gains_hand_example():
    g = sh_gains(45, 30)
    assert g == pytest.approx((1, 0.61237, 0.5, 0.61237), abs=1e-5)


def test_gains_unit_norm_and_wrap():
    for az in range(-360, 361, 15):
        for el in range(-90, 91, 15):
            g = sh_gains(az, el)
            assert g.w == 1
            assert g.y**2 + g.z**2 + g.x**2 == pytest.approx(1, abs=1e-12)
    assert sh_gains(370, 10) == pytest.approx(sh_gains(10, 10))
    with pytest.raises(RangeError):
        sh_gains(0, 91)


@pytest.mark.parametrize("az,el", [(0, 0), (-120, 45), (179, -89), (33, 12)])
def test_doa_round_trip(az, el):
    est = doa_estimate(encode_plane_wave(_noise(), az, el, SR))
    assert angular_distance(az, el, *est) < 0.1


def test_doa_frame_selection_and_silence():
    sig = np.r_[np.zeros(2400), _noise(2400)]
    foa = encode_plane_wave(sig, 60, 10, SR)
    assert doa_estimate(foa, (2400, 4800)) == pytest.approx((60, 10), abs=1e-9)
    with pytest.raises(NoEstimateError):
        doa_estimate(foa, (0, 2400))
    with pytest.raises(NoEstimateError):
        doa_estimate(foa, slice(10, 10))
    with pytest.raises(FormatError):
        doa_estimate(AudioClip(np.zeros((2, 10)), SR))


def test_tetra_omni_field():
    s = _noise()
    foa = encode_capsules_to_foa(AudioClip(np.tile(s, (4, 1)), SR), TETRA)
    w, y, z, x = foa.samples
    assert np.allclose(w, s, rtol=1e-9)
    assert max(np.abs(x).max(), np.abs(y).max(), np.abs(z).max()) < 1e-9 * np.abs(s).max()


def test_capsule_plane_wave_decode():
    s = _noise()
    # capsule pickup of a plane wave from (30, 0): the capsule row of spherical-harmonic gains
    target = np.array(sh_gains(30, 0))
    caps = np.array([np.dot(sh_gains(*d), target) for d in TETRA])[:, None] * s
    foa = encode_capsules_to_foa(AudioClip(caps, SR), TETRA)
    az, el = doa_estimate(foa)
    assert angular_distance(az, el, 30, 0) < 2


def test_em32_open_array_consistency():
    arr = MicArray.preset("em32", (0, 0, 0))
    dirs = arr.directions()
    rng = np.random.default_rng(4)
    s = _noise()
    for _ in range(10):
        az, el = rng.uniform(-180, 180), rng.uniform(-80, 80)
        u = np.array([math.cos(math.radians(az)) * math.cos(math.radians(el)),
                      math.sin(math.radians(az)) * math.cos(math.radians(el)),
                      math.sin(math.radians(el))])
        gains = np.array([c.gain(u)[0] for c in arr.capsules])     # cardioid pickup
        foa = encode_capsules_to_foa(AudioClip(gains[:, None] * s, SR), dirs)
        assert angular_distance(az, el, *doa_estimate(foa)) < 2


def test_encoder_preconditions():
    with pytest.raises(RangeError):
        encoding_matrix(TETRA[:3])
    with pytest.raises(ConditioningError) as exc:
        encoding_matrix([(0, 0), (90, 0), (180, 0), (-90, 0)])     # coplanar: no Z information
    assert exc.value.cond >= 1e6
    with pytest.raises(FormatError):
        encode_capsules_to_foa(AudioClip(np.zeros((3, 10)), SR), TETRA)


def test_encoder_linearity():
    a, b = _noise(seed=1), _noise(seed=2)
    caps1 = np.outer(np.arange(1, 5), a)
    caps2 = np.outer(np.arange(4, 0, -1), b)
    lhs = encode_capsules_to_foa(AudioClip(2.0 * caps1 - 0.5 * caps2, SR), TETRA).samples
    rhs = (2.0 * encode_capsules_to_foa(AudioClip(caps1, SR), TETRA).samples
           - 0.5 * encode_capsules_to_foa(AudioClip(caps2, SR), TETRA).samples)
    assert np.abs(lhs - rhs).max() < 1e-9
