import json
import math
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from seldscape import io as sio
from seldscape.ambisonics import angular_distance, doa_estimate
from seldscape.annotations import AnnotationFrame, active_frames, polyphony, split_events
from seldscape.composer import (
    DistributionSpec,
    Scaper,
    generate,
    instantiate,
    loop_to_length,
    render,
    sample_distribution,
    scene_from_dict,
)
from seldscape.errors import CorpusError, SamplingError
from seldscape.geometry import MicArray, RoomSpec, cartesian_to_spherical
from seldscape.rir import Rir, RirDatabase, save_rir_database
from seldscape.spatializer import VirtualRoom, rms_db

import synth

SR = 24000


def scene(tmp_path, corpus, bg=None, **kw):
    return scene_from_dict(synth.scene_doc(corpus, bg, **kw), base_dir=tmp_path)


def test_distribution_examples():
    rng = np.random.default_rng(0)
    assert sample_distribution(DistributionSpec.const(5), rng) == 5
    assert sample_distribution(DistributionSpec.choose(["a"]), rng) == "a"
    draws = [sample_distribution(DistributionSpec.uniform(0, 1), rng) for _ in range(10**4)]
    assert 0.47 <= np.mean(draws) <= 0.53


def test_distribution_parse_and_errors():
    assert DistributionSpec.parse(["uniform", 6, 30]) == DistributionSpec.uniform(6, 30)
    assert DistributionSpec.parse(3.5) == DistributionSpec.const(3.5)
    assert DistributionSpec.parse(["choose", []]).is_corpus_choice
    assert DistributionSpec.parse(["normal", 0, 1, -1, 1]).to_json() == ["normal", 0, 1, -1, 1]
    with pytest.raises(ValueError):
        DistributionSpec.parse(["uniform", 1])
    with pytest.raises(ValueError):
        DistributionSpec.uniform(2, 1)
    rng = np.random.default_rng(1)
    with pytest.raises(CorpusError):
        sample_distribution(DistributionSpec.choose(), rng, [])
    with pytest.raises(SamplingError):
        sample_distribution(DistributionSpec.normal(0, 1, 50, 60), rng)
    v = [sample_distribution(DistributionSpec.normal(0, 1, -0.5, 0.5), rng) for _ in range(200)]
    assert min(v) >= -0.5 and max(v) <= 0.5


def test_uniform_vector_bounds():
    rng = np.random.default_rng(2)
    p = sample_distribution(DistributionSpec.parse(["uniform", [1, 1, 0.5], [4, 2, 1.5]]), rng)
    assert len(p) == 3 and 1 <= p[0] <= 4 and 0.5 <= p[2] <= 1.5


def test_instantiate_literal_values(tmp_path, corpus):
    sc = scene(tmp_path, corpus, events=[{
        "label": ["const", "speech"], "source_file": ["const", "speech1.wav"], "source_time": 0.5,
        "event_time": 1.0, "event_duration": 1.5, "snr": 12, "trajectory": [[1, 1, 1]],
    }])
    ev = instantiate(sc).events[0]
    assert (ev.label, ev.class_index, ev.source_time, ev.onset, ev.duration, ev.snr) == ("speech", 1, 0.5, 1.0, 1.5, 12)
    assert ev.source_file.endswith("speech/speech1.wav")
    assert ev.trajectory.mode == "static" and ev.trajectory.waypoints == ((1, 1, 1),)


def test_instantiate_deterministic(tmp_path, corpus):
    doc = synth.scene_doc(corpus, events=[{"snr": ["uniform", 0, 20]}, {"event_time": ["uniform", 0, 2]}])
    a = instantiate(scene_from_dict(doc)).to_dict()
    b = instantiate(scene_from_dict(doc)).to_dict()
    c = instantiate(scene_from_dict({**doc, "seed": 8})).to_dict()
    assert a == b and a != c


def test_instantiate_clamps_to_scene(tmp_path, corpus):
    sc = scene(tmp_path, corpus, duration=2.0, events=[{"event_time": 1.5, "event_duration": 3.0}])
    ev = instantiate(sc).events[0]
    assert ev.onset == 1.5 and ev.duration == pytest.approx(0.5)
    sc = scene(tmp_path, corpus, duration=2.0, events=[{"event_time": -1.0, "event_duration": 1.0}])
    assert instantiate(sc).events[0].onset == 0.0


def test_choose_from_corpus_is_uniform(tmp_path):
    fg = synth.make_corpus(tmp_path / "fg3", labels=("bird",), files_per_label=3, seconds=0.5)
    counts = Counter()
    for seed in range(300):
        doc = synth.scene_doc(fg, seed=seed, events=[{"label": ["const", "bird"]}])
        counts[instantiate(scene_from_dict(doc)).events[0].source_file] += 1
    assert len(counts) == 3
    assert all(65 <= c <= 135 for c in counts.values())


def test_unknown_label_is_corpus_error(tmp_path, corpus):
    with pytest.raises(CorpusError):
        instantiate(scene(tmp_path, corpus, events=[{"label": ["const", "cat"]}]))


def test_label_map_overrides_alphabetical(tmp_path, corpus):
    sc = scene(tmp_path, corpus, label_map={"dog": 7, "speech": 2})
    assert instantiate(sc).events[0].class_index == 7


def test_background_only_level(tmp_path, corpus, bg_corpus):
    sc = scene(tmp_path, corpus, bg_corpus, events=[])
    out = render(sc)
    assert out.labels == []
    assert rms_db(out.audio, active=False) == pytest.approx(-50, abs=0.5)
    # diffuse: the same signal in every channel
    assert np.array_equal(out.audio.samples[0], out.audio.samples[3])


def test_static_event_rows(tmp_path, corpus):
    pos = [4.0, 2.5, 1.2]
    sc = scene(tmp_path, corpus, events=[{"label": ["const", "dog"], "event_time": 2.0,
                                          "event_duration": 1.0, "trajectory": [pos]}])
    out = render(sc)
    assert [r.frame for r in out.labels] == list(range(20, 30))
    az, el, d = cartesian_to_spherical(pos, (2.5, 1.5, 1.0))
    for r in out.labels:
        assert abs(r.azimuth - az) <= 1 and abs(r.elevation - el) <= 1
        assert abs(r.distance - d * 100) <= 1


def test_label_audio_consistency(tmp_path, corpus):
    sc = scene(tmp_path, corpus, events=[{"label": ["const", "dog"], "event_time": 0.35,
                                          "event_duration": 2.0, "trajectory": [[1.0, 0.6, 1.7]]}])
    out = render(sc)
    hop = SR // 10
    for r in out.labels:
        est = doa_estimate(out.audio, (r.frame * hop, (r.frame + 1) * hop))
        assert angular_distance(r.azimuth, r.elevation, *est) < 10


def test_mixture_linearity(tmp_path, corpus):
    sc = scene(tmp_path, corpus, reflection=0.5, max_order=3, events=[
        {"label": ["const", "dog"], "event_time": 0.2, "event_duration": 1.5, "trajectory": [[1, 1, 1]]},
        {"label": ["const", "speech"], "event_time": 1.0, "event_duration": 2.0,
         "trajectory": [[4, 2, 1.5], [3, 0.5, 0.5]]},
    ])
    conc = instantiate(sc)
    both = render(sc, conc, normalize=False).audio.samples
    a = render(sc, replace(conc, events=conc.events[:1]), normalize=False).audio.samples
    b = render(sc, replace(conc, events=conc.events[1:]), normalize=False).audio.samples
    assert np.sqrt(np.mean((both - a - b) ** 2)) < 1e-6


def test_effects_in_scene(tmp_path, corpus):
    sc = scene(tmp_path, corpus, events=[{"label": ["const", "dog"], "event_time": 0.0, "event_duration": 2.0,
                                          "pitch_shift": 3, "time_stretch": 1.25, "trajectory": [[1, 1, 1]]}])
    out = render(sc)
    ev = out.concrete.events[0]
    assert ev.pitch_shift == 3 and ev.time_stretch == 1.25
    assert len(out.labels) == 20


def test_generate_writes_outputs(tmp_path, corpus, bg_corpus):
    sc = scene(tmp_path, corpus, bg_corpus)
    wav, csv, js = generate(sc, tmp_path / "out" / "rs1.wav")
    assert wav.name == "rs1.wav" and csv.name == "rs1.csv" and js.name == "rs1.json"
    clip = sio.read_wav(wav)
    assert clip.channels == 4 and clip.length == 4 * SR
    prov = json.loads(js.read_text())
    assert prov["normalization_gain"] == 1.0
    assert prov["events"][0]["label"] == "dog"
    assert sio.read_dcase_csv(csv)


def test_generate_byte_identical(tmp_path, corpus, bg_corpus):
    sc = scene(tmp_path, corpus, bg_corpus, reflection=0.6, max_order=4,
               events=[{"snr": ["uniform", 5, 25]}, {"trajectory_mode": "random_walk",
                                                     "trajectory": [[1, 1, 1], [4, 2, 1]]}])
    a = generate(sc, tmp_path / "a" / "x")
    b = generate(sc, tmp_path / "b" / "x")
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()


def test_mic_format_channels(tmp_path, corpus):
    sc = scene(tmp_path, corpus, format="mic")
    assert sc.format == "mic"
    assert render(sc).audio.channels == 4


def test_database_room_snaps_labels(tmp_path, corpus):
    rirs = [Rir(np.eye(4, 64), SR, p, (2, 2, 1), "foa") for p in ((1, 2, 1), (3, 2, 1))]
    save_rir_database(tmp_path / "db", RirDatabase("r", SR, "foa", [(1, 2, 1), (3, 2, 1)], rirs, (2, 2, 1)))
    doc = synth.scene_doc(corpus, events=[{"label": ["const", "dog"], "event_time": 0, "event_duration": 1.0,
                                           "trajectory": [[2.9, 2.2, 1]]}])
    doc["room"] = {"database": str(tmp_path / "db")}
    out = render(scene_from_dict(doc))
    assert {(r.azimuth, r.elevation, r.distance) for r in out.labels} == {(0, 0, 100)}


def test_loop_equal_power_seams():
    rng = np.random.default_rng(6)
    x = rng.standard_normal(24000)
    y = loop_to_length(x, 6000, 200000, 1200)
    assert len(y) == 200000
    assert np.array_equal(y[:10000], x[6000:16000])
    # uncorrelated material keeps its power through the seam
    first_seam = 18000 - 1200
    seam_db = 10 * np.log10(np.mean(y[first_seam:first_seam + 1200] ** 2))
    assert abs(seam_db - 10 * np.log10(np.mean(x**2))) < 1.0
    assert abs(10 * np.log10(np.mean(y**2) / np.mean(x**2))) < 0.1


def test_scaper_builder(tmp_path, corpus, bg_corpus):
    vroom = VirtualRoom(RoomSpec((5, 3, 2), 0.0), MicArray.preset("em32", (2.5, 2.5, 0.5)), "foa", SR, 0)
    ssc = Scaper(4, vroom, corpus, bg_corpus, ref_db=-50)
    ssc.add_background(label=("const", "ambience"), source_file=("choose", []), source_time=("const", 0))
    ssc.add_event(label=("choose", []), event_xyz=("const", [[4.0, 0.1, 0.2], [4.5, 0.1, 1.9]]))
    wav, csv, _ = ssc.generate(tmp_path / "rs1.wav")
    rows = sio.read_dcase_csv(csv)
    assert rows and len(split_events(rows)) == 1
    assert all(b.elevation >= a.elevation for a, b in zip(rows, rows[1:]))


@pytest.mark.parametrize("onset,dur,expected", [
    (2.0, 1.0, list(range(20, 30))),
    (0.05, 0.1, [0, 1]),
    (0.02, 0.3, [0, 1, 2, 3]),
    (0.06, 0.28, [0, 1, 2, 3]),
    (1.0, 0.0, []),
])
def test_active_frames_rule(onset, dur, expected):
    assert active_frames(onset, dur) == expected


def test_active_frames_count_bound():
    rng = np.random.default_rng(5)
    for _ in range(500):
        onset, dur = rng.uniform(0, 10), rng.uniform(0.01, 5)
        n = len(active_frames(onset, dur))
        assert abs(n - math.ceil(dur / 0.1)) <= 1


def test_polyphony_counts():
    rows = [AnnotationFrame(0, 1, 0, 0, 0), AnnotationFrame(0, 2, 1, 0, 0), AnnotationFrame(1, 1, 0, 0, 0)]
    assert polyphony(rows) == {0: 2, 1: 1}
