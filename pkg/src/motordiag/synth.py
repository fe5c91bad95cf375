"""
Deterministic surrogate motor recordings for all five classes.

Every clip is a function of (spec, label, index) only: the random stream is
seeded from those three values, so clips can be generated in any order.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .audio import MANIFEST_NAME, AudioClip, ClassLabel, LabeledDataset, write_manifest, write_wav
from .errors import EmptyDataset, IoFailure

N_HARMONICS = 6
GEAR_SIDEBAND_HZ = 7.0
GEAR_SIDEBAND_REL = 0.4
FREQ_JITTER = 0.02
BRUSH_RMS_FRACTION = 0.3

# (modulation depth, noise multiplier) for the broken-blade classes
_BLADE_FAULTS = {
    ClassLabel.FIVE_BLADES_FAULT: (0.25, 2.0),
    ClassLabel.TEN_BLADES_FAULT: (0.50, 3.0),
}
_LABEL_INDEX = {label: i for i, label in enumerate(ClassLabel)}


@dataclass(frozen=True)
class SynthSpec:
    sample_rate_hz: int = 44100
    duration_s: float = 1.0
    base_hz: float = 120.0
    clips_per_class: int = 30
    noise_std: float = 0.01
    seed: int = 0
    fundamental_amp: float = 0.2
    harmonic_decay: float = 0.6

    def __post_init__(self):
        if not self.base_hz < self.sample_rate_hz / 2:
            raise ValueError("base_hz must lie below the Nyquist frequency")
        if self.duration_s <= 0 or self.sample_rate_hz < 1:
            raise ValueError("duration and sample rate must be positive")
        if self.clips_per_class < 0 or self.noise_std < 0:
            raise ValueError("counts and noise level must be non-negative")

    @property
    def harmonic_amps(self) -> np.ndarray:
        return self.fundamental_amp * self.harmonic_decay ** np.arange(N_HARMONICS)

    @property
    def healthy_rms(self) -> float:
        """Expected RMS of a healthy clip (harmonic stack plus noise)."""
        return float(np.sqrt(np.sum(self.harmonic_amps ** 2) / 2 + self.noise_std ** 2))

    def to_dict(self) -> dict:
        return asdict(self)


def _rng(spec: SynthSpec, label: ClassLabel, index: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed & (2**64 - 1), _LABEL_INDEX[label], index])


def gen_clip(spec: SynthSpec, label: ClassLabel, index: int) -> AudioClip:
    rng = _rng(spec, label, index)
    n = int(round(spec.duration_s * spec.sample_rate_hz))
    t = np.arange(n) / spec.sample_rate_hz

    # draw every random quantity up front so all classes consume the stream alike
    f0 = spec.base_hz * (1.0 + rng.uniform(-FREQ_JITTER, FREQ_JITTER))
    phases = rng.uniform(0.0, 2 * np.pi, size=(N_HARMONICS, 3))
    mod_phase = rng.uniform(0.0, 2 * np.pi)
    noise = rng.standard_normal(n)

    amps = spec.harmonic_amps
    harmonics = np.zeros(n)
    for k in range(N_HARMONICS):
        harmonics += amps[k] * np.sin(2 * np.pi * (k + 1) * f0 * t + phases[k, 0])

    if label is ClassLabel.SHIFTED_BRUSH_FAULT:
        x = BRUSH_RMS_FRACTION * spec.healthy_rms * noise
    elif label is ClassLabel.GEAR_FAULT:
        x = harmonics + spec.noise_std * noise
        for k in range(N_HARMONICS):
            fk = (k + 1) * f0
            a = GEAR_SIDEBAND_REL * amps[k]
            x += a * np.sin(2 * np.pi * (fk - GEAR_SIDEBAND_HZ) * t + phases[k, 1])
            x += a * np.sin(2 * np.pi * (fk + GEAR_SIDEBAND_HZ) * t + phases[k, 2])
    elif label in _BLADE_FAULTS:
        depth, noise_mult = _BLADE_FAULTS[label]
        envelope = 1.0 + depth * np.cos(2 * np.pi * (f0 / 5.0) * t + mod_phase)
        x = envelope * harmonics + noise_mult * spec.noise_std * noise
    else:
        x = harmonics + spec.noise_std * noise

    return AudioClip(np.clip(x, -1.0, 1.0), spec.sample_rate_hz, label)


def class_counts_for(spec: SynthSpec, overrides: Optional[Mapping] = None) -> dict:
    counts = {label: spec.clips_per_class for label in ClassLabel}
    for key, value in (overrides or {}).items():
        label = key if isinstance(key, ClassLabel) else ClassLabel.parse(key)
        counts[label] = int(value)
    if any(v < 0 for v in counts.values()):
        raise ValueError("class counts must be non-negative")
    return counts


def gen_dataset(spec: SynthSpec, class_counts: Optional[Mapping] = None) -> LabeledDataset:
    counts = class_counts_for(spec, class_counts)
    if sum(counts.values()) == 0:
        raise EmptyDataset("every class count is zero")
    clips = [gen_clip(spec, label, i) for label in ClassLabel for i in range(counts[label])]
    return LabeledDataset(tuple(clips), provenance=f"synth:seed={spec.seed}")


def clip_filename(label: ClassLabel, index: int) -> str:
    return f"class_{label.token}_{index}.wav"


def write_dataset(dataset: LabeledDataset, root) -> Path:
    """Write one 16-bit WAV per clip plus the manifest; return the manifest path."""
    root = Path(root)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {root}: {exc}") from exc
    seen: dict = {}
    entries = []
    for clip in dataset.clips:
        idx = seen.get(clip.label, 0)
        seen[clip.label] = idx + 1
        name = clip_filename(clip.label, idx)
        write_wav(root / name, clip)
        entries.append((name, clip.label))
    manifest = root / MANIFEST_NAME
    try:
        write_manifest(manifest, entries)
    except OSError as exc:
        raise IoFailure(f"cannot write {manifest}: {exc}") from exc
    return manifest
