"""Discrete signals, WAV ingestion/export and energy ratios."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile


class WavError(Exception):
    """Unreadable or unsupported WAV input."""


@dataclass(frozen=True, eq=False)
class Signal:
    samples: np.ndarray
    sample_rate: int = 32000

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        if x.size == 0:
            raise ValueError("a signal needs at least one sample")
        if not np.all(np.isfinite(x)):
            raise ValueError("signal samples must be finite")
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def length(self) -> int:
        return self.samples.size

    @property
    def energy(self) -> float:
        return energy(self.samples)


def energy(x) -> float:
    x = np.asarray(getattr(x, "samples", x), dtype=np.float64)
    return float(x @ x)


def _ratio_db(num: float, den: float) -> float:
    if den == 0.0:
        return math.inf
    if num == 0.0:
        return -math.inf
    return 10.0 * math.log10(num / den)


def srr(reference, approximant) -> float:
    """Signal-to-residual ratio ``10 log10(|f_n|^2 / |f - f_n|^2)`` in dB.

    ``+inf`` when the residual vanishes, ``-inf`` when the approximant does.
    """
    f = np.asarray(getattr(reference, "samples", reference), dtype=np.float64)
    fn = np.asarray(getattr(approximant, "samples", approximant), dtype=np.float64)
    if f.shape != fn.shape:
        raise ValueError(f"length mismatch: {f.shape} vs {fn.shape}")
    return _ratio_db(energy(fn), energy(f - fn))


# the codec's SNR is the same ratio measured on the quantized approximant
snr = srr


def load_wav(path) -> Signal:
    """Read a PCM16 or float32 WAV file; multichannel input keeps channel 0."""
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except (OSError, ValueError) as exc:
        raise WavError(f"cannot read {path}: {exc}") from exc
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        x = data.astype(np.float64)
    else:
        raise WavError(f"{path}: unsupported sample format {data.dtype} "
                       "(expected 16-bit PCM or 32-bit float)")
    if x.ndim == 2:
        if x.shape[1] > 1:
            warnings.warn(f"{path}: {x.shape[1]} channels, keeping channel 0", stacklevel=2)
        x = x[:, 0]
    if x.size == 0:
        raise WavError(f"{path}: no audio frames")
    return Signal(x, int(rate))


def save_wav(path, signal: Signal, fmt: str = "pcm16") -> None:
    x = signal.samples
    if fmt == "pcm16":
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    elif fmt == "float32":
        data = x.astype(np.float32)
    else:
        raise ValueError(f"unknown WAV format {fmt!r}")
    wavfile.write(Path(path), signal.sample_rate, data)


def write_metric_csv(path, residual_energies, srr_values) -> None:
    """Iteration, residual energy and SRR, one row per iteration."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "residual_energy", "srr_db"])
        for n, (e, r) in enumerate(zip(residual_energies, srr_values)):
            w.writerow([n, repr(float(e)), repr(float(r))])
