"""Synthetic test material: sparse dictionary signals and audio-like mixtures."""

from __future__ import annotations

import numpy as np

from .dictionary import AtomParam, DictConfig, atom_segment, dict_size


def sparse_tf_signal(config: DictConfig, m: int, rng: np.random.Generator):
    """Sum of ``m`` distinct atoms drawn uniformly from the full dictionary,
    with standard normal amplitudes.  Returns ``(signal, params, amplitudes)``."""
    if not 0 < m < config.length:
        raise ValueError("need 0 < m < N")
    per_scale = np.array([s // 2 * config.length for s in config.scales])
    flat = rng.choice(dict_size(config), size=m, replace=False)
    amps = rng.standard_normal(m)
    bounds = np.cumsum(per_scale)
    x = np.zeros(config.length)
    params = []
    for idx, a in zip(flat, amps):
        k = int(np.searchsorted(bounds, idx, side="right"))
        local = int(idx - (bounds[k - 1] if k else 0))
        u, xi = divmod(local, config.scales[k] // 2)
        p = AtomParam(k, u, xi)
        start, seg = atom_segment(p, config)
        x[start:start + len(seg)] += a * seg
        params.append(p)
    return x, params, amps


def audio_like(N: int, rng: np.random.Generator, sample_rate: int = 32000, *,
               n_notes: int = 6, n_clicks: int = 8, noise: float = 1e-3) -> np.ndarray:
    """Amplitude-modulated harmonic notes, decaying noise clicks
    and a faint noise floor; peak-normalized to 0.9."""
    t = np.arange(N) / sample_rate
    x = np.zeros(N)
    for _ in range(n_notes):
        f0 = 110.0 * 2 ** rng.uniform(0, 4)
        start = int(rng.integers(0, N // 2))
        dur = int(rng.integers(N // 8, N - start + 1))
        env = np.zeros(N)
        ramp = np.arange(dur)
        attack = max(1, int(0.01 * sample_rate))
        env[start:start + dur] = np.minimum(1.0, ramp / attack) * np.exp(-ramp / (0.4 * dur))
        am = 1.0 + 0.5 * np.sin(2 * np.pi * rng.uniform(2, 8) * t + rng.uniform(0, 2 * np.pi))
        note = np.zeros(N)
        for h in range(1, 9):
            fh = f0 * h
            if fh >= 0.45 * sample_rate:
                break
            note += rng.uniform(0.3, 1.0) / h * np.cos(2 * np.pi * fh * t + rng.uniform(0, 2 * np.pi))
        x += rng.uniform(0.3, 1.0) * env * am * note
    for _ in range(n_clicks):
        pos = int(rng.integers(0, N))
        length = int(rng.integers(16, 256))
        seg = rng.standard_normal(length) * np.exp(-np.arange(length) / (length / 5))
        stop = min(N, pos + length)
        x[pos:stop] += rng.uniform(0.5, 2.0) * seg[:stop - pos]
    x += noise * rng.standard_normal(N)
    peak = np.max(np.abs(x))
    return 0.9 * x / peak if peak > 0 else x


def unit_sphere_dictionary(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """``n x m`` matrix with columns uniform on the unit sphere."""
    A = rng.standard_normal((n, m))
    return A / np.linalg.norm(A, axis=0)
