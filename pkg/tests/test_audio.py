import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from motordiag.audio import (
    AudioClip,
    ClassLabel,
    LabeledDataset,
    concat_windows,
    load_dataset,
    load_wav,
    parse_wav_bytes,
    read_manifest,
    resample_linear,
    segment,
    write_manifest,
    write_wav,
)
from motordiag.errors import (
    AmbiguousLabel,
    EmptyAudio,
    EmptyDataset,
    MalformedHeader,
    UnsupportedEncoding,
    WindowTooShort,
)


def wav_bytes(frames, rate=44100, bits=16, channels=1, tag=1, extensible_guid=None):
    """Independent writer: frames is an int array shaped (n,) or (n, channels)."""
    frames = np.asarray(frames).reshape(-1, channels)
    width = bits // 8
    raw = bytearray()
    for row in frames:
        for v in row:
            v = int(v)
            if bits == 8:
                raw += struct.pack("<B", v + 128)
            elif bits == 24:
                raw += (v & 0xFFFFFF).to_bytes(3, "little")
            else:
                raw += struct.pack("<h" if bits == 16 else "<i", v)
    if extensible_guid is not None:
        fmt = struct.pack("<HHIIHH", 0xFFFE, channels, rate, rate * channels * width,
                          channels * width, bits)
        fmt += struct.pack("<HHI", 22, bits, 0) + extensible_guid
    else:
        fmt = struct.pack("<HHIIHH", tag, channels, rate, rate * channels * width,
                          channels * width, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"LIST" + struct.pack("<I", 4) + b"INFO"  # unrelated chunk to skip
    body += b"data" + struct.pack("<I", len(raw)) + bytes(raw)
    if len(raw) % 2:
        body += b"\x00"
    return b"RIFF" + struct.pack("<I", len(body)) + body


PCM_GUID = bytes.fromhex("0100000000001000800000aa00389b71")


def test_all_zero_file():
    clip = parse_wav_bytes(wav_bytes(np.zeros(100, dtype=int)))
    assert np.all(clip.samples == 0.0)


def test_full_scale_positive_is_bit_exact():
    clip = parse_wav_bytes(wav_bytes([32767, -32768, 1]))
    assert clip.samples[0] == 32767 / 32768
    assert clip.samples[1] == -1.0
    assert clip.samples[2] == 1 / 32768


def test_one_second_file(tmp_path):
    rng = np.random.default_rng(0)
    frames = rng.integers(-32768, 32768, 44100)
    p = tmp_path / "a.wav"
    p.write_bytes(wav_bytes(frames))
    clip = load_wav(p)
    assert clip.samples.size == 44100
    assert clip.sample_rate_hz == 44100
    np.testing.assert_array_equal(clip.samples, frames / 32768.0)


@pytest.mark.parametrize("bits", [8, 24, 32])
def test_other_bit_depths(bits):
    scale = 2 ** (bits - 1)
    frames = np.array([0, scale - 1, -scale, scale // 2])
    clip = parse_wav_bytes(wav_bytes(frames, bits=bits))
    np.testing.assert_array_equal(clip.samples, frames / scale)


def test_extensible_pcm_is_accepted():
    clip = parse_wav_bytes(wav_bytes([100, -100], extensible_guid=PCM_GUID))
    np.testing.assert_array_equal(clip.samples, np.array([100, -100]) / 32768)


def test_stereo_is_averaged():
    frames = np.array([[1000, 3000], [-2000, 0]])
    clip = parse_wav_bytes(wav_bytes(frames, channels=2))
    np.testing.assert_allclose(clip.samples, [2000 / 32768, -1000 / 32768])


def test_errors():
    with pytest.raises(MalformedHeader):
        parse_wav_bytes(b"RIFX0000WAVE")
    with pytest.raises(MalformedHeader):
        parse_wav_bytes(b"RIFF" + struct.pack("<I", 4) + b"WAVE")
    with pytest.raises(UnsupportedEncoding):
        parse_wav_bytes(wav_bytes([0, 1], tag=3))
    with pytest.raises(UnsupportedEncoding):
        parse_wav_bytes(wav_bytes([0, 1], extensible_guid=b"\x03" + PCM_GUID[1:]))
    with pytest.raises(EmptyAudio):
        parse_wav_bytes(wav_bytes(np.zeros(0, dtype=int)))


def test_write_read_round_trip(tmp_path):
    x = np.array([0.0, 0.5, -0.5, 1.0, -1.0, 1e-6])
    p = tmp_path / "x.wav"
    write_wav(p, AudioClip(x, 8000))
    back = load_wav(p)
    assert back.sample_rate_hz == 8000
    assert np.max(np.abs(back.samples - x)) <= 1 / 32768


def test_clip_validation():
    with pytest.raises(ValueError):
        AudioClip(np.array([0.0, 1.5]), 100)
    with pytest.raises(EmptyAudio):
        AudioClip(np.zeros(0), 100)
    c = AudioClip(np.zeros(3), 100)
    with pytest.raises(ValueError):
        c.samples[0] = 1.0


def test_segment_discards_partial_window():
    clip = AudioClip(np.linspace(-1, 1, 2500), 1000)
    w = segment(clip, 1.0)
    assert [x.samples.size for x in w] == [1000, 1000]
    np.testing.assert_array_equal(concat_windows(w), clip.samples[:2000])


def test_segment_identity_and_errors():
    x = np.random.default_rng(1).uniform(-1, 1, 1000)
    clip = AudioClip(x, 1000, ClassLabel.GEAR_FAULT)
    (only,) = segment(clip, 1.0)
    np.testing.assert_array_equal(only.samples, x)
    assert only.label is ClassLabel.GEAR_FAULT
    with pytest.raises(WindowTooShort):
        segment(AudioClip(np.zeros(10), 1), 1.0)
    assert segment(AudioClip(np.zeros(5), 10), 1.0) == []


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 5000), rate=st.integers(2, 2000), w=st.floats(0.01, 3.0))
def test_segment_concat_is_prefix(n, rate, w):
    if round(w * rate) < 2:
        return
    x = np.random.default_rng(n).uniform(-1, 1, n)
    windows = segment(AudioClip(x, rate), w)
    joined = concat_windows(windows) if windows else np.zeros(0)
    width = round(w * rate)
    assert joined.size == (n // width) * width
    np.testing.assert_array_equal(joined, x[: joined.size])


def test_resample_linear_preserves_duration():
    clip = AudioClip(np.sin(np.linspace(0, 6, 4000)) * 0.5, 4000)
    r = resample_linear(clip, 2000)
    assert r.sample_rate_hz == 2000 and r.samples.size == 2000


def _write(tmp_path, rel, x, rate=1000):
    p = tmp_path / rel
    p.parent.mkdir(parents=True, exist_ok=True)
    write_wav(p, AudioClip(x, rate))
    return p


def test_load_dataset_class_dirs(tmp_path):
    _write(tmp_path, "healthy/a.wav", np.zeros(1000))
    _write(tmp_path, "fault1/b.wav", np.full(1000, 0.25))
    ds = load_dataset(tmp_path)
    assert len(ds) == 2
    assert sorted(c.label.value for c in ds) == ["fault1", "healthy"]
    assert sorted(ds.binary_labels.tolist()) == [0, 1]


def test_load_dataset_manifest(tmp_path):
    _write(tmp_path, "x/a.wav", np.zeros(2500))
    _write(tmp_path, "x/b.wav", np.full(1000, 0.1))
    write_manifest(tmp_path / "m.csv", [("x/a.wav", ClassLabel.HEALTHY),
                                        ("x/b.wav", ClassLabel.SHIFTED_BRUSH_FAULT)])
    ds = load_dataset(tmp_path, tmp_path / "m.csv")
    assert len(ds) == 3
    assert sum(c.label is ClassLabel.HEALTHY for c in ds) == 2


def test_manifest_ambiguous_label(tmp_path):
    m = tmp_path / "m.csv"
    m.write_text("path,label\na.wav,healthy\na.wav,fault2\n")
    with pytest.raises(AmbiguousLabel):
        read_manifest(m)


def test_load_dataset_empty(tmp_path):
    with pytest.raises(EmptyDataset):
        load_dataset(tmp_path)
    with pytest.raises(EmptyDataset):
        load_dataset(tmp_path / "missing")


def test_mixed_rates_are_resampled(tmp_path):
    _write(tmp_path, "healthy/a.wav", np.zeros(2000), rate=2000)
    _write(tmp_path, "healthy/b.wav", np.zeros(2000), rate=2000)
    _write(tmp_path, "fault3/c.wav", np.zeros(1000), rate=1000)
    ds = load_dataset(tmp_path)
    assert ds.sample_rate_hz == 2000 and len(ds) == 3


def test_label_parsing():
    assert ClassLabel.parse("Healthy") is ClassLabel.HEALTHY
    assert ClassLabel.parse(ClassLabel.TEN_BLADES_FAULT.token) is ClassLabel.TEN_BLADES_FAULT
    with pytest.raises(ValueError):
        ClassLabel.parse("broken")
    assert ClassLabel.HEALTHY.binary() == 0
    assert all(c.binary() == 1 for c in ClassLabel if c is not ClassLabel.HEALTHY)


def test_dataset_requires_labels():
    with pytest.raises(ValueError):
        LabeledDataset((AudioClip(np.zeros(2), 10),))
