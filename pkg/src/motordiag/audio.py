"""
Loading, validating and segmenting PCM WAV recordings.

Functions
---------
`load_wav`: read a RIFF/WAVE PCM file into an `AudioClip` (mono, [-1, 1]).
`write_wav`: write a clip as 16-bit PCM.
`segment`: cut a clip into non-overlapping fixed-length windows.
`load_dataset`: read a directory (manifest or per-class folders) into a
`LabeledDataset`.
"""
from __future__ import annotations

import enum
import os
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import (
    AmbiguousLabel,
    EmptyAudio,
    EmptyDataset,
    IoFailure,
    MalformedHeader,
    UnsupportedEncoding,
    WindowTooShort,
)

MANIFEST_NAME = "manifest.csv"

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE
# KSDATAFORMAT_SUBTYPE_PCM
_PCM_SUBFORMAT = b"\x01\x00\x00\x00\x00\x00\x10\x00\x80\x00\x00\xaa\x00\x38\x9b\x71"


class ClassLabel(enum.Enum):
    """Recording class. Only `HEALTHY` maps to the negative (0) binary class."""

    HEALTHY = "healthy"
    GEAR_FAULT = "fault1"
    FIVE_BLADES_FAULT = "fault2"
    TEN_BLADES_FAULT = "fault3"
    SHIFTED_BRUSH_FAULT = "fault4"

    def binary(self) -> int:
        return 0 if self is ClassLabel.HEALTHY else 1

    @property
    def token(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "ClassLabel":
        key = text.strip().lower()
        for label in cls:
            if key in (label.value, label.name.lower()):
                return label
        raise ValueError(f"unknown class label {text!r}")


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate_hz: int
    label: Optional[ClassLabel] = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise EmptyAudio("clip must hold a non-empty 1-D sample array")
        if not np.all(np.abs(samples) <= 1.0):
            raise ValueError("samples must lie in [-1, 1]")
        if int(self.sample_rate_hz) < 1:
            raise ValueError("sample_rate_hz must be >= 1")
        samples = samples.copy()
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def with_label(self, label: Optional[ClassLabel]) -> "AudioClip":
        return AudioClip(self.samples, self.sample_rate_hz, label)


@dataclass(frozen=True)
class LabeledDataset:
    clips: tuple
    provenance: str = ""

    def __post_init__(self):
        clips = tuple(self.clips)
        if any(c.label is None for c in clips):
            raise ValueError("every clip in a LabeledDataset needs a label")
        if len({c.sample_rate_hz for c in clips}) > 1:
            raise ValueError("all clips must share one sample rate")
        object.__setattr__(self, "clips", clips)

    def __len__(self):
        return len(self.clips)

    def __iter__(self):
        return iter(self.clips)

    @property
    def labels(self) -> list:
        return [c.label for c in self.clips]

    @property
    def binary_labels(self) -> np.ndarray:
        return np.array([c.label.binary() for c in self.clips], dtype=np.int64)

    @property
    def sample_rate_hz(self) -> Optional[int]:
        return self.clips[0].sample_rate_hz if self.clips else None


# --------------------------------------------------------------------------
# WAV reading / writing


def _iter_chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack("<4sI", data[pos:pos + 8])
        yield cid, data[pos + 8:pos + 8 + size]
        pos += 8 + size + (size & 1)


def parse_wav_bytes(data: bytes) -> AudioClip:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedHeader("not a RIFF/WAVE container")

    fmt = None
    payload = None
    for cid, body in _iter_chunks(data):
        if cid == b"fmt " and fmt is None:
            fmt = body
        elif cid == b"data" and payload is None:
            payload = body
    if fmt is None or len(fmt) < 16:
        raise MalformedHeader("missing or truncated fmt chunk")
    if payload is None:
        raise MalformedHeader("missing data chunk")

    tag, channels, rate, _, block_align, bits = struct.unpack("<HHIIHH", fmt[:16])
    if tag == _WAVE_FORMAT_EXTENSIBLE:
        if len(fmt) < 40 or fmt[24:40] != _PCM_SUBFORMAT:
            raise UnsupportedEncoding("extensible WAV with non-PCM subformat")
    elif tag != _WAVE_FORMAT_PCM:
        raise UnsupportedEncoding(f"format tag 0x{tag:04x} is not PCM")
    if bits not in (8, 16, 24, 32):
        raise UnsupportedEncoding(f"unsupported bit depth {bits}")
    if channels < 1 or rate < 1:
        raise MalformedHeader("channel count and sample rate must be positive")

    width = bits // 8
    frame = width * channels
    if block_align and block_align != frame:
        raise MalformedHeader(f"block align {block_align} != {frame}")
    n_frames = len(payload) // frame
    if n_frames == 0:
        raise EmptyAudio("data chunk holds no samples")
    raw = payload[:n_frames * frame]

    if bits == 8:
        ints = np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0
    elif bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = (b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)).astype(np.int64)
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints).astype(np.float64)
    else:
        ints = np.frombuffer(raw, dtype=f"<i{width}").astype(np.float64)

    samples = ints / float(1 << (bits - 1))
    samples = samples.reshape(n_frames, channels).mean(axis=1)
    return AudioClip(samples, rate)


def load_wav(path) -> AudioClip:
    """Read a PCM WAV file.

    Integer samples are divided by the magnitude of the type's most negative
    value (128, 32768, 2**23, 2**31) and channels are averaged to mono.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return parse_wav_bytes(data)


def write_wav(path, clip: AudioClip) -> None:
    """Write `clip` as mono 16-bit PCM; amplitudes are clipped to [-1, 1]."""
    x = np.clip(np.asarray(clip.samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2").tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(pcm), b"WAVE",
        b"fmt ", 16, _WAVE_FORMAT_PCM, 1, clip.sample_rate_hz,
        clip.sample_rate_hz * 2, 2, 16,
        b"data", len(pcm),
    )
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(pcm)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# --------------------------------------------------------------------------
# segmentation and resampling


def segment(clip: AudioClip, window_seconds: float = 1.0) -> list:
    """Split into consecutive non-overlapping windows; a short tail is dropped."""
    width = int(round(window_seconds * clip.sample_rate_hz))
    if window_seconds <= 0 or width < 2:
        raise WindowTooShort(
            f"{window_seconds} s at {clip.sample_rate_hz} Hz gives {width} samples per window"
        )
    count = clip.samples.size // width
    return [
        AudioClip(clip.samples[i * width:(i + 1) * width], clip.sample_rate_hz, clip.label)
        for i in range(count)
    ]


def resample_linear(clip: AudioClip, rate_hz: int) -> AudioClip:
    if rate_hz == clip.sample_rate_hz:
        return clip
    n_out = max(1, int(round(clip.samples.size * rate_hz / clip.sample_rate_hz)))
    t_in = np.arange(clip.samples.size) / clip.sample_rate_hz
    t_out = np.arange(n_out) / rate_hz
    return AudioClip(np.interp(t_out, t_in, clip.samples), rate_hz, clip.label)


# --------------------------------------------------------------------------
# datasets


def read_manifest(path) -> dict:
    """Parse `relative/path,label` lines into {relative path: ClassLabel}."""
    assigned: dict = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        rel, sep, tag = line.rpartition(",")
        if lineno == 1 and (rel.strip().lower(), tag.strip().lower()) == ("path", "label"):
            continue
        if not sep or not rel:
            raise ValueError(f"{path}:{lineno}: expected 'path,label'")
        label = ClassLabel.parse(tag)
        key = os.path.normpath(rel.strip())
        if key in assigned and assigned[key] is not label:
            raise AmbiguousLabel(
                f"{key} labelled both {assigned[key].token} and {label.token}"
            )
        assigned[key] = label
    return assigned


def write_manifest(path, entries: Iterable) -> None:
    lines = [f"{rel},{label.token}\n" for rel, label in entries]
    Path(path).write_text("".join(lines), encoding="utf-8")


def _discover_class_dirs(root: Path) -> dict:
    found = {}
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        try:
            label = ClassLabel.parse(sub.name)
        except ValueError:
            continue
        for wav in sorted(sub.rglob("*.wav")):
            found[os.path.normpath(str(wav.relative_to(root)))] = label
    return found


def load_dataset(root, manifest=None, window_seconds: float = 1.0) -> LabeledDataset:
    """Load every labelled WAV below `root` and cut it into windows.

    Labels come from `manifest` (or `root/manifest.csv` when present),
    otherwise from per-class subdirectories named after a label token
    (`healthy`, `fault1` .. `fault4`) or class name. Recordings whose rate
    differs from the majority rate are linearly resampled to it.
    """
    root = Path(root)
    if not root.is_dir():
        raise EmptyDataset(f"{root} is not a directory")
    if manifest is None and (root / MANIFEST_NAME).is_file():
        manifest = root / MANIFEST_NAME
    entries = read_manifest(manifest) if manifest is not None else _discover_class_dirs(root)
    if not entries:
        raise EmptyDataset(f"no labelled recordings under {root}")

    loaded = [(rel, load_wav(root / rel).with_label(label)) for rel, label in entries.items()]
    rates = Counter(clip.sample_rate_hz for _, clip in loaded)
    # ties broken toward the higher rate so the choice is order independent
    majority = max(rates.items(), key=lambda kv: (kv[1], kv[0]))[0]

    windows = []
    for _, clip in loaded:
        windows.extend(segment(resample_linear(clip, majority), window_seconds))
    if not windows:
        raise EmptyDataset(f"recordings under {root} are shorter than one window")
    return LabeledDataset(tuple(windows), provenance=f"dir:{root.name}")


def concat_windows(windows: Sequence[AudioClip]) -> np.ndarray:
    return np.concatenate([w.samples for w in windows]) if windows else np.zeros(0)


def label_counts(dataset: LabeledDataset) -> Mapping:
    return Counter(c.label for c in dataset.clips)
