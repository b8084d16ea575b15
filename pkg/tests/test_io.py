import json
import struct
import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.io import wavfile

from seldscape import io as sio
from seldscape.annotations import AnnotationFrame
from seldscape.audio import AudioClip
from seldscape.errors import FormatError, LayoutError, ParseError, SchemaError

import synth

SR = 24000


def test_float32_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, (4, 1001)).astype(np.float32).astype(np.float64)
    p = sio.write_wav(tmp_path / "a.wav", AudioClip(x, SR))
    back = sio.read_wav(p)
    assert back.channels == 4 and back.sample_rate == SR
    assert np.array_equal(back.samples, x)
    # an independent reader agrees
    rate, data = wavfile.read(p)
    assert rate == SR and np.array_equal(data.T.astype(np.float64), x)


def test_int16_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, (2, 5000))
    x[0, :2] = [1.0, -1.0]
    p = sio.write_wav(tmp_path / "b.wav", AudioClip(x, SR), encoding="int16")
    back = sio.read_wav(p)
    assert np.abs(back.samples - x).max() <= 1 / 32768
    with wave.open(str(p)) as w:
        assert (w.getnchannels(), w.getsampwidth(), w.getframerate(), w.getnframes()) == (2, 2, SR, 5000)


def test_reads_stdlib_pcm(tmp_path):
    # 16- and 24-bit PCM written by the standard library
    rng = np.random.default_rng(2)
    for width, scale in ((2, 32768), (3, 8388608)):
        ints = rng.integers(-scale, scale, (300, 3))
        if width == 2:
            raw = ints.astype("<i2").tobytes()
        else:
            u = ints.astype(np.int64) & 0xFFFFFF
            raw = np.stack([(u >> 8 * k) & 0xFF for k in range(3)], axis=-1).astype(np.uint8).tobytes()
        p = tmp_path / f"pcm{width}.wav"
        with wave.open(str(p), "wb") as w:
            w.setnchannels(3)
            w.setsampwidth(width)
            w.setframerate(16000)
            w.writeframes(raw)
        clip = sio.read_wav(p)
        assert clip.sample_rate == 16000 and clip.channels == 3
        assert np.array_equal(clip.samples, ints.T / scale)


def test_partial_read(tmp_path):
    x = np.arange(40, dtype=np.float64).reshape(2, 20) / 64
    p = sio.write_wav(tmp_path / "c.wav", AudioClip(x, SR))
    assert np.array_equal(sio.read_wav(p, 5, 9).samples, x[:, 5:9])
    assert sio.wav_info(p).frames == 20


def test_malformed_wav_reports_offset(tmp_path):
    p = tmp_path / "bad.wav"
    p.write_bytes(b"RIFX" + b"\x00" * 40)
    with pytest.raises(FormatError, match="byte offset 0"):
        sio.read_wav(p)
    good = sio.write_wav(tmp_path / "g.wav", AudioClip(np.zeros((1, 100)), SR))
    data = good.read_bytes()
    (tmp_path / "trunc.wav").write_bytes(data[:-50])
    with pytest.raises(FormatError, match="byte offset"):
        sio.read_wav(tmp_path / "trunc.wav")
    (tmp_path / "nodata.wav").write_bytes(b"RIFF" + struct.pack("<I", 4) + b"WAVE")
    with pytest.raises(FormatError, match="no data chunk"):
        sio.read_wav(tmp_path / "nodata.wav")


def test_csv_examples(tmp_path):
    p = sio.write_dcase_csv(tmp_path / "e.csv", [])
    assert p.read_bytes() == b"" and sio.read_dcase_csv(p) == []
    p = sio.write_dcase_csv(tmp_path / "one.csv", [AnnotationFrame(20, 3, 0, -60, 15, 180)])
    assert p.read_bytes() == b"20,3,0,-60,15,180\n"
    p = sio.write_dcase_csv(tmp_path / "five.csv", [AnnotationFrame(1, 0, 0, 10, 5)], with_distance=False)
    assert p.read_text() == "1,0,0,10,5\n"
    assert sio.read_dcase_csv(p) == [AnnotationFrame(1, 0, 0, 10, 5, None)]


def test_csv_sorted_and_deterministic(tmp_path):
    frames = [AnnotationFrame(3, 1, 0, 0, 0, 1), AnnotationFrame(1, 2, 0, 0, 0, 1), AnnotationFrame(1, 0, 1, 0, 0, 1)]
    a = sio.write_dcase_csv(tmp_path / "a.csv", frames).read_bytes()
    b = sio.write_dcase_csv(tmp_path / "b.csv", frames[::-1]).read_bytes()
    assert a == b
    assert [f.frame for f in sio.read_dcase_csv(tmp_path / "a.csv")] == [1, 1, 3]


@pytest.mark.parametrize("text,line", [("1,2,3,4,5,6\n1,2,3,x,5,6\n", 2), ("1,2,3\n", 1), ("1,2,3,4,5,6\n1,2,3,4,5\n", 2)])
def test_csv_parse_errors(tmp_path, text, line):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ParseError) as exc:
        sio.read_dcase_csv(p)
    assert exc.value.line == line


frame_st = st.builds(
    AnnotationFrame,
    st.integers(0, 10**5), st.integers(0, 50), st.integers(0, 9),
    st.integers(-180, 179), st.integers(-90, 90), st.integers(0, 5000),
)


@settings(max_examples=20, deadline=None)
@given(st.lists(frame_st, max_size=500, unique_by=lambda f: f.sort_key()))
def test_csv_round_trip_property(tmp_path_factory, frames):
    p = tmp_path_factory.mktemp("csv") / "x.csv"
    sio.write_dcase_csv(p, frames)
    assert sio.read_dcase_csv(p) == sorted(frames, key=AnnotationFrame.sort_key)


def test_csv_round_trip_10k(tmp_path):
    rng = np.random.default_rng(3)
    frames = sorted({AnnotationFrame(int(f), int(c), int(t), int(a), int(e), int(d))
                     for f, c, t, a, e, d in zip(rng.integers(0, 600, 10**4), rng.integers(0, 13, 10**4),
                                                 rng.integers(0, 3, 10**4), rng.integers(-180, 180, 10**4),
                                                 rng.integers(-90, 91, 10**4), rng.integers(0, 900, 10**4))},
                    key=AnnotationFrame.sort_key)
    frames = list({f.sort_key(): f for f in frames}.values())
    p = sio.write_dcase_csv(tmp_path / "big.csv", frames)
    assert sio.read_dcase_csv(p) == frames


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 300), st.sampled_from([8000, 24000, 48000]))
def test_wav_round_trip_property(tmp_path_factory, ch, n, sr):
    rng = np.random.default_rng(ch * 1000 + n)
    x = rng.uniform(-1, 1, (ch, n)).astype(np.float32).astype(np.float64)
    p = sio.write_wav(tmp_path_factory.mktemp("w") / "x.wav", AudioClip(x, sr))
    back = sio.read_wav(p)
    assert back.sample_rate == sr and np.array_equal(back.samples, x)


def test_scan_corpus(tmp_path):
    synth.make_corpus(tmp_path / "c", labels=("dog", "music"))
    c = sio.scan_corpus(tmp_path / "c")
    assert sorted(c) == ["dog", "music"]
    assert all(len(v) == 2 for v in c.values())
    with pytest.raises(FileNotFoundError):
        sio.scan_corpus(tmp_path / "nope")


def test_scan_dataset_pairs_sibling_dirs(tmp_path):
    root = tmp_path / "ds"
    (root / "metadata" / "dev").mkdir(parents=True)
    (root / "foa" / "dev").mkdir(parents=True)
    (root / "metadata" / "dev" / "fold1_room1_mix001.csv").write_text("")
    sio.write_wav(root / "foa" / "dev" / "fold1_room1_mix001.wav", AudioClip(np.zeros((4, 10)), SR))
    (root / "metadata" / "dev" / "orphan.csv").write_text("")
    idx = sio.scan_dataset(root)
    assert [p[2] for p in idx.pairs] == ["fold1_room1_mix001"]
    assert len(idx.skipped) == 1 and "no matching WAV" in idx.skipped[0][1]
    with pytest.raises(LayoutError):
        sio.scan_dataset(root / "foa")


def test_scene_config_schema_errors(tmp_path, corpus):
    doc = synth.scene_doc(corpus)
    doc["ref_db"] = "loud"
    doc["duration"] = -1
    doc["room"]["dims"] = [5, 3]
    p = synth.write_config(tmp_path / "s.json", doc)
    with pytest.raises(SchemaError) as exc:
        sio.parse_scene_config(p)
    pointers = {v[0] for v in exc.value.violations}
    assert {"/ref_db", "/duration"} <= pointers
    assert any(ptr.startswith("/room") for ptr in pointers)
    assert "/ref_db" in str(exc.value)


def test_scene_config_invalid_json(tmp_path):
    p = tmp_path / "s.json"
    p.write_text("{not json")
    with pytest.raises(SchemaError):
        sio.parse_scene_config(p)


def test_scene_config_relative_paths(tmp_path, corpus, monkeypatch):
    doc = synth.scene_doc("fg")
    (tmp_path / "cfg").mkdir()
    p = synth.write_config(tmp_path / "cfg" / "s.json", doc)
    scene = sio.parse_scene_config(p, corpus_root=tmp_path)
    assert scene.fg_path == tmp_path / "fg"
    monkeypatch.setenv("SELDSCAPE_CORPUS_ROOT", str(tmp_path))
    assert sio.parse_scene_config(p).fg_path == tmp_path / "fg"
    monkeypatch.delenv("SELDSCAPE_CORPUS_ROOT")
    assert sio.parse_scene_config(p).fg_path == tmp_path / "cfg" / "fg"
    assert json.loads(p.read_text())["fg_path"] == "fg"
