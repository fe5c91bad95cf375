"""Frequency-domain features: radix-2 FFT, band limiting, pooling, scaling."""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .audio import AudioClip, ClassLabel
from .errors import EmptyBand, EmptyInput, IoFailure

DEFAULT_FEATURES = 2025
AUDIBLE_BAND = (16.0, 20000.0)

_bitrev_cache: dict = {}


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def _bit_reverse_indices(n: int) -> np.ndarray:
    idx = _bitrev_cache.get(n)
    if idx is None:
        bits = n.bit_length() - 1
        idx = np.zeros(n, dtype=np.intp)
        src = np.arange(n)
        for b in range(bits):
            idx |= ((src >> b) & 1) << (bits - 1 - b)
        _bitrev_cache[n] = idx
    return idx


def _radix2(x: np.ndarray, sign: float) -> np.ndarray:
    # iterative decimation in time over the last axis; len is a power of two
    n = x.shape[-1]
    lead = x.shape[:-1]
    y = x[..., _bit_reverse_indices(n)]
    half = 1
    while half < n:
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / (2 * half))
        y = y.reshape(lead + (n // (2 * half), 2 * half))
        even = y[..., :half]
        odd = y[..., half:] * tw
        y = np.concatenate([even + odd, even - odd], axis=-1)
        half *= 2
    return y.reshape(lead + (n,))


def fft(samples) -> np.ndarray:
    """Discrete Fourier transform after zero-padding to the next power of two.

    Works along the last axis, so a 2-D array is transformed row by row.
    """
    x = np.asarray(samples)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise EmptyInput("fft of an empty sequence")
    n = x.shape[-1]
    m = next_pow2(n)
    padded = np.zeros(x.shape[:-1] + (m,), dtype=np.complex128)
    padded[..., :n] = x
    return _radix2(padded, -1.0)


def ifft(spectrum) -> np.ndarray:
    z = np.asarray(spectrum, dtype=np.complex128)
    if z.ndim == 0 or z.shape[-1] == 0:
        raise EmptyInput("ifft of an empty sequence")
    n = z.shape[-1]
    if n & (n - 1):
        raise ValueError("ifft length must be a power of two")
    return _radix2(z, 1.0) / n


@dataclass(frozen=True)
class Spectrum:
    """One-sided magnitude spectrum; bin k sits at (first_bin + k) * bin_hz."""

    magnitudes: np.ndarray
    bin_hz: float
    lo_hz: float
    hi_hz: float
    first_bin: int = 0

    @property
    def frequencies(self) -> np.ndarray:
        return (self.first_bin + np.arange(self.magnitudes.size)) * self.bin_hz


def magnitude_spectrum(clip: AudioClip) -> Spectrum:
    z = fft(clip.samples)
    n = z.size
    mags = np.abs(z[: n // 2 + 1])
    bin_hz = clip.sample_rate_hz / n
    return Spectrum(mags, bin_hz, 0.0, (n // 2) * bin_hz)


def band_limit(spectrum: Spectrum, lo_hz: float = AUDIBLE_BAND[0],
               hi_hz: float = AUDIBLE_BAND[1]) -> Spectrum:
    """Keep the bins whose centre frequency lies in [lo_hz, min(hi_hz, top bin)]."""
    if not lo_hz < hi_hz:
        raise ValueError(f"band [{lo_hz}, {hi_hz}] is empty by construction")
    freqs = spectrum.frequencies
    top = min(hi_hz, spectrum.hi_hz)
    keep = (freqs >= lo_hz) & (freqs <= top)
    if not keep.any():
        raise EmptyBand(f"no bins in [{lo_hz}, {hi_hz}] Hz")
    first = int(np.argmax(keep))
    last = first + int(keep.sum())
    return Spectrum(
        spectrum.magnitudes[first:last],
        spectrum.bin_hz,
        max(lo_hz, spectrum.lo_hz),
        top,
        spectrum.first_bin + first,
    )


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    label: Optional[ClassLabel] = None
    scale_reference: float = 1.0

    def __len__(self):
        return self.values.size


def pool_magnitudes(mags, n_features: int) -> np.ndarray:
    mags = np.asarray(mags, dtype=np.float64)
    if mags.size == 0:
        raise EmptyBand("cannot pool an empty spectrum")
    if n_features < 1:
        raise ValueError("feature count must be positive")
    b = mags.size
    if b < n_features:
        return np.interp(np.linspace(0.0, b - 1, n_features), np.arange(b), mags)
    # group sizes differ by at most one, larger groups first
    base, extra = divmod(b, n_features)
    sizes = np.full(n_features, base)
    sizes[:extra] += 1
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    return np.add.reduceat(mags, starts) / sizes


def pool_to_features(spectrum: Spectrum, n_features: int = DEFAULT_FEATURES,
                     label: Optional[ClassLabel] = None) -> FeatureVector:
    return FeatureVector(pool_magnitudes(spectrum.magnitudes, n_features), label)


def normalize_dataset(features: Sequence[FeatureVector]) -> list:
    """Divide every vector by the largest absolute value in the whole list.

    The divisor is folded into each vector's `scale_reference`, so applying
    the function a second time changes nothing.
    """
    if not features:
        raise ValueError("normalize_dataset needs at least one vector")
    peak = max(float(np.max(np.abs(f.values))) for f in features)
    if peak == 0.0:
        return list(features)
    return [
        replace(f, values=f.values / peak, scale_reference=f.scale_reference * peak)
        for f in features
    ]


def clip_features(clip: AudioClip, n_features: int = DEFAULT_FEATURES,
                  band=AUDIBLE_BAND) -> FeatureVector:
    spec = band_limit(magnitude_spectrum(clip), *band)
    return pool_to_features(spec, n_features, clip.label)


def featurize(clips: Sequence[AudioClip], n_features: int = DEFAULT_FEATURES,
              band=AUDIBLE_BAND, normalize: bool = True) -> list:
    """Raw pipeline: spectrum, band limit and pool for each clip, then scale."""
    feats = [clip_features(c, n_features, band) for c in clips]
    return normalize_dataset(feats) if normalize else feats


def stack(features: Sequence[FeatureVector]) -> np.ndarray:
    return np.vstack([f.values for f in features])


# --------------------------------------------------------------------------
# feature CSV


def write_features_csv(path, features: Sequence[FeatureVector]) -> None:
    if not features:
        raise ValueError("nothing to write")
    width = len(features[0])
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"f{i}" for i in range(width)] + ["label"])
            for f in features:
                tag = f.label.token if f.label is not None else ""
                w.writerow([repr(float(v)) for v in f.values] + [tag])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_features_csv(path, scale_reference: float = 1.0) -> list:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0][-1] != "label":
        raise ValueError(f"{path}: missing f0..fN,label header")
    out = []
    for row in rows[1:]:
        if not row:
            continue
        label = ClassLabel.parse(row[-1]) if row[-1] else None
        out.append(FeatureVector(np.array(row[:-1], dtype=np.float64), label, scale_reference))
    return out


def features_meta_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.name + ".meta.json")
