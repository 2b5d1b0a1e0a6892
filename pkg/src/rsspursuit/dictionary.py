"""Multiscale time-frequency dictionaries (real Gabor and MDCT unions).

Atom geometry
-------------
An atom of scale ``s`` (``h = s/2``) and time ``u`` occupies the samples
``[u - h, u + h)``; frame-local sample ``n`` in ``[0, s)`` sits at
``u - h + n``.  The unnormalized kernels are

* Gabor: ``g[n] * cos(2*pi*xi*(n - h)/s)``, ``xi = 0 .. h-1`` (cosine phase,
  so the window peak at ``n = h`` is the phase origin);
* MDCT:  ``sqrt(2/h) * w[n] * cos(pi/h * (n + 1/2 + h/2) * (xi + 1/2))`` with
  the sine window ``w[n] = sin(pi*(n + 1/2)/s)``.

Samples falling outside ``[0, N)`` are dropped and the atom is renormalized,
so every atom has unit norm and the signal is never padded.

Time grids
----------
The full dictionary uses every ``u`` in ``[0, N)``.  A subdictionary keeps, per
scale, the residue class ``u = tau (mod h)`` inside ``[0, N)`` (the half-overlap
frame grid shifted by ``tau``) and then every ``d``-th frame starting at a
per-scale decimation phase.  When ``h`` divides ``N`` each shifted grid has
exactly ``2N/s`` frames, so a ``d = 1`` subdictionary always holds ``K*N``
atoms and the union over all shifts is the full dictionary.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
import scipy.fft
from numpy.lib.stride_tricks import sliding_window_view


class Family(enum.IntEnum):
    GABOR = 0
    MDCT = 1


class Window(enum.IntEnum):
    HANN = 0
    GAUSSIAN = 1
    SINE = 2


class ExactRepresentation(Exception):
    """Raised by atom selection when every coefficient is zero."""


@dataclass(frozen=True)
class DictConfig:
    scales: tuple[int, ...]
    length: int
    family: Family = Family.MDCT
    window: Window = Window.SINE

    def __post_init__(self):
        scales = tuple(int(s) for s in self.scales)
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "window", Window(self.window))
        if self.length <= 0:
            raise ValueError("signal length must be positive")
        if not scales:
            raise ValueError("at least one scale is required")
        if any(s < 4 or s % 4 for s in scales):
            raise ValueError(f"scales must be multiples of 4, got {scales}")
        if any(b <= a for a, b in zip(scales, scales[1:])):
            raise ValueError("scales must be strictly increasing")
        if scales[-1] > self.length:
            raise ValueError("largest scale exceeds the signal length")
        if self.family == Family.MDCT and self.window != Window.SINE:
            raise ValueError("MDCT atoms use the sine window")

    @property
    def n_scales(self) -> int:
        return len(self.scales)

    def to_text(self) -> str:
        return (f"family={self.family.name.lower()};window={self.window.name.lower()};"
                f"length={self.length};scales={','.join(map(str, self.scales))}")

    @classmethod
    def from_text(cls, text: str) -> "DictConfig":
        try:
            fields = dict(item.split("=", 1) for item in text.strip().split(";") if item)
            return cls(scales=tuple(int(s) for s in fields["scales"].split(",")),
                       length=int(fields["length"]),
                       family=Family[fields["family"].upper()],
                       window=Window[fields["window"].upper()])
        except (KeyError, ValueError) as exc:
            raise ValueError(f"bad dictionary description {text!r}: {exc}") from None


def canonical_shift(u: int, s: int) -> int:
    """The grid shift in ``[-s/4, s/4)`` whose frame grid contains ``u``."""
    h, q = s // 2, s // 4
    return (u + q) % h - q


@dataclass(frozen=True, order=True)
class AtomParam:
    """Atom index ``(scale index, time, frequency bin)``; ``tau`` is provenance."""

    k: int
    u: int
    xi: int
    tau: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SubdictSpec:
    config: DictConfig
    shifts: tuple[int, ...] | None = None
    subsample: int = 1
    phases: tuple[int, ...] | None = None

    def __post_init__(self):
        K = self.config.n_scales
        if self.subsample < 1:
            raise ValueError("subsample factor must be >= 1")
        if self.shifts is not None:
            object.__setattr__(self, "shifts", tuple(int(t) for t in self.shifts))
            if len(self.shifts) != K:
                raise ValueError("one shift per scale is required")
        phases = tuple(int(p) for p in self.phases) if self.phases is not None else (0,) * K
        if len(phases) != K or any(not 0 <= p < self.subsample for p in phases):
            raise ValueError("decimation phases must lie in [0, subsample)")
        object.__setattr__(self, "phases", phases)

    @property
    def is_full(self) -> bool:
        return self.shifts is None

    @classmethod
    def full(cls, config: DictConfig) -> "SubdictSpec":
        return cls(config)

    @classmethod
    def coarse(cls, config: DictConfig, subsample: int = 1) -> "SubdictSpec":
        return cls(config, (0,) * config.n_scales, subsample)


def frame_positions(sub: SubdictSpec, k: int) -> np.ndarray:
    """Sorted atom times ``u`` of scale ``k`` in ``sub``."""
    N = sub.config.length
    if sub.is_full:
        return np.arange(N, dtype=np.int64)
    h = sub.config.scales[k] // 2
    grid = np.arange(sub.shifts[k] % h, N, h, dtype=np.int64)
    return grid[sub.phases[k]::sub.subsample]


def dict_size(config: DictConfig, sub: SubdictSpec | None = None) -> int:
    if sub is None:
        return sum(s // 2 * config.length for s in config.scales)
    return sum(len(frame_positions(sub, k)) * (s // 2) for k, s in enumerate(config.scales))


# --------------------------------------------------------------------------
# per-scale kernels


class _Kernel:
    """Precomputed analysis/synthesis data for one (family, window, scale)."""

    def __init__(self, family: Family, window: Window, s: int):
        self.family, self.s = family, s
        self.h = h = s // 2
        n = np.arange(s, dtype=np.float64)
        xi = np.arange(h, dtype=np.float64)
        if family == Family.MDCT:
            self.amp = math.sqrt(2.0 / h) * np.sin(np.pi * (n + 0.5) / s)
            self.n0 = 0.5 + h / 2.0
            # cos(2*theta) phase term used by the masked-norm formula
            self.norm_twist = np.exp(1j * np.pi * self.n0 * (2 * xi + 1) / h)
            self.norm_bins = (2 * np.arange(h) + 1)
        else:
            if window == Window.HANN:
                g = 0.5 - 0.5 * np.cos(2 * np.pi * n / s)
            elif window == Window.GAUSSIAN:
                g = np.exp(-0.5 * ((n - h) / (s / 6.0)) ** 2)
            else:
                g = np.sin(np.pi * (n + 0.5) / s)
            self.amp = g
            self.pre = g
            self.post = np.where(np.arange(h) % 2 == 0, 1.0, -1.0)
            self.norm_twist = np.ones(h)
            self.norm_bins = 2 * np.arange(h)
        self.interior_norms = self.masked_norms(0, s)

    def phase(self, xi: int) -> np.ndarray:
        n = np.arange(self.s, dtype=np.float64)
        if self.family == Family.MDCT:
            return np.pi / self.h * (n + self.n0) * (xi + 0.5)
        return 2 * np.pi * xi * (n - self.h) / self.s

    def kernel(self, xi: int) -> np.ndarray:
        return self.amp * np.cos(self.phase(xi))

    @functools.lru_cache(maxsize=512)
    def masked_norms(self, lo: int, hi: int) -> np.ndarray:
        """Norms of every bin's kernel restricted to frame samples ``[lo, hi)``.

        Uses cos^2 = (1 + cos 2x)/2, so all bins come out of one FFT of the
        squared, masked window.
        """
        v = np.zeros(self.s)
        v[lo:hi] = self.amp[lo:hi] ** 2
        V = np.fft.fft(v)
        sq = 0.5 * (v.sum() + np.real(self.norm_twist * np.conj(V[self.norm_bins])))
        out = np.sqrt(np.maximum(sq, 0.0))
        out.flags.writeable = False
        return out

    def analyze(self, frames: np.ndarray) -> np.ndarray:
        """Unnormalized inner products of each row of ``frames`` with every bin."""
        if self.family == Family.GABOR:
            spec = scipy.fft.rfft(frames * self.pre, axis=-1)[..., : self.h]
            return spec.real * self.post
        # TDAC fold to length h, then a DCT-IV
        z = frames * self.amp
        h, q = self.h, self.h // 2
        folded = np.concatenate([-z[..., h + q - 1:h - 1:-1] - z[..., h + q:],
                                 z[..., :q] - z[..., h - 1:q - 1:-1]], axis=-1)
        return 0.5 * scipy.fft.dct(folded, type=4, axis=-1)


@functools.lru_cache(maxsize=64)
def _kernel(family: Family, window: Window, s: int) -> _Kernel:
    return _Kernel(family, window, s)


def kernel_for(config: DictConfig, k: int) -> _Kernel:
    return _kernel(config.family, config.window, config.scales[k])


def _valid_range(u: int, h: int, N: int) -> tuple[int, int]:
    """Frame-local sample range of an atom at ``u`` that lies inside ``[0, N)``."""
    return max(0, h - u), min(2 * h, N - u + h)


# --------------------------------------------------------------------------
# synthesis


def check_param(param: AtomParam, config: DictConfig) -> None:
    if not 0 <= param.k < config.n_scales:
        raise ValueError(f"scale index {param.k} out of range")
    s = config.scales[param.k]
    if not 0 <= param.u < config.length:
        raise ValueError(f"time {param.u} outside [0, {config.length})")
    if not 0 <= param.xi < s // 2:
        raise ValueError(f"frequency bin {param.xi} outside [0, {s // 2})")


def atom_segment(param: AtomParam, config: DictConfig) -> tuple[int, np.ndarray]:
    """Unit-norm atom restricted to its support; returns ``(start, samples)``."""
    check_param(param, config)
    kern = kernel_for(config, param.k)
    lo, hi = _valid_range(param.u, kern.h, config.length)
    seg = kern.kernel(param.xi)[lo:hi]
    norm = math.sqrt(float(seg @ seg))
    if norm <= 1e-12:
        raise ValueError(f"atom {param} has an empty support after truncation")
    return param.u - kern.h + lo, seg / norm


def atom(param: AtomParam, config: DictConfig) -> np.ndarray:
    start, seg = atom_segment(param, config)
    out = np.zeros(config.length)
    out[start:start + len(seg)] = seg
    return out


def gabor_atom(param: AtomParam, config: DictConfig) -> np.ndarray:
    if config.family != Family.GABOR:
        raise ValueError("gabor_atom needs a Gabor dictionary")
    return atom(param, config)


def mdct_atom(param: AtomParam, config: DictConfig) -> np.ndarray:
    if config.family != Family.MDCT:
        raise ValueError("mdct_atom needs an MDCT dictionary")
    return atom(param, config)


# --------------------------------------------------------------------------
# analysis


def _frame_coefficients(residual: np.ndarray, config: DictConfig, k: int,
                        positions: np.ndarray) -> np.ndarray:
    kern = kernel_for(config, k)
    h, N = kern.h, config.length
    if len(positions) == 0:
        return np.zeros((0, h))
    start = positions - h
    edge = (start < 0) | (start + kern.s > N)
    windows = sliding_window_view(residual, kern.s)
    if not edge.any():
        frames = windows[start]
    else:
        frames = np.zeros((len(positions), kern.s))
        frames[~edge] = windows[start[~edge]]
        for row in np.flatnonzero(edge):
            a, b = _valid_range(int(positions[row]), h, N)
            frames[row, a:b] = residual[start[row] + a:start[row] + b]
    raw = kern.analyze(frames)
    coef = raw / kern.interior_norms
    for row in np.flatnonzero(edge):
        norms = kern.masked_norms(*_valid_range(int(positions[row]), h, N))
        safe = np.where(norms > 1e-12, norms, 1.0)
        coef[row] = np.where(norms > 1e-12, raw[row] / safe, 0.0)
    return coef


class TFTable:
    """Coefficients of one residual on one subdictionary.

    Stored per scale as ``(positions, matrix)`` with rows ordered by time, so
    the flat order within a scale is lexicographic in ``(u, xi)``.
    """

    def __init__(self, sub: SubdictSpec, blocks: list[tuple[np.ndarray, np.ndarray]]):
        self.sub = sub
        self.blocks = blocks

    def __len__(self) -> int:
        return sum(c.size for _, c in self.blocks)

    def _param(self, k: int, row: int, xi: int) -> AtomParam:
        u = int(self.blocks[k][0][row])
        return AtomParam(k, u, xi, canonical_shift(u, self.sub.config.scales[k]))

    def argmax(self, exclude: Sequence[AtomParam] = ()) -> tuple[AtomParam, float]:
        best, best_key = -1.0, None
        masked: dict[int, list[tuple[int, int]]] = {}
        for p in exclude:
            hit = self.locate(p)
            if hit is not None:
                masked.setdefault(p.k, []).append(hit)
        for k, (_, coef) in enumerate(self.blocks):
            if coef.size == 0:
                continue
            mag = np.abs(coef)
            if k in masked:
                mag = mag.copy()
                for row, xi in masked[k]:
                    mag[row, xi] = -1.0
            flat = int(np.argmax(mag))
            val = float(mag.flat[flat])
            if val > best:
                best, best_key = val, (k, flat)
        if best_key is None or best <= 0.0:
            raise ExactRepresentation("all coefficients vanish")
        k, flat = best_key
        row, xi = divmod(flat, self.blocks[k][1].shape[1])
        return self._param(k, row, xi), float(self.blocks[k][1][row, xi])

    def locate(self, p: AtomParam) -> tuple[int, int] | None:
        positions = self.blocks[p.k][0]
        row = int(np.searchsorted(positions, p.u))
        if row < len(positions) and positions[row] == p.u:
            return row, p.xi
        return None

    def value(self, p: AtomParam) -> float:
        hit = self.locate(p)
        if hit is None:
            raise KeyError(p)
        return float(self.blocks[p.k][1][hit])

    def items(self) -> Iterator[tuple[AtomParam, float]]:
        for k, (positions, coef) in enumerate(self.blocks):
            for row in range(len(positions)):
                for xi in range(coef.shape[1]):
                    yield self._param(k, row, xi), float(coef[row, xi])

    def as_dict(self) -> dict[AtomParam, float]:
        return dict(self.items())

    def refresh(self, residual: np.ndarray, lo: int, hi: int) -> None:
        """Recompute only the frames whose support meets samples ``[lo, hi)``."""
        config = self.sub.config
        for k, (positions, coef) in enumerate(self.blocks):
            h = config.scales[k] // 2
            a = int(np.searchsorted(positions, lo - h, side="right"))
            b = int(np.searchsorted(positions, hi + h, side="left"))
            if b > a:
                coef[a:b] = _frame_coefficients(residual, config, k, positions[a:b])


def project(residual, sub: SubdictSpec) -> TFTable:
    """Inner products of ``residual`` with every atom of ``sub``."""
    r = np.asarray(getattr(residual, "samples", residual), dtype=np.float64)
    config = sub.config
    if r.shape != (config.length,):
        raise ValueError(f"residual length {r.shape} != {config.length}")
    if dict_size(config, sub) == 0:
        raise ValueError("empty subdictionary: the subsample factor leaves no frames")
    blocks = []
    for k in range(config.n_scales):
        positions = frame_positions(sub, k)
        blocks.append((positions, _frame_coefficients(r, config, k, positions)))
    return TFTable(sub, blocks)


def enumerate_atoms(sub: SubdictSpec) -> Iterator[AtomParam]:
    """All atoms of ``sub`` in index order ``(k, u, xi)``."""
    for k, s in enumerate(sub.config.scales):
        for u in frame_positions(sub, k):
            for xi in range(s // 2):
                yield AtomParam(k, int(u), xi, canonical_shift(int(u), s))


def atom_index(sub: SubdictSpec, p: AtomParam) -> int:
    """Position of ``p`` in the ordering of :func:`enumerate_atoms`."""
    offset = 0
    for k, s in enumerate(sub.config.scales):
        positions = frame_positions(sub, k)
        h = s // 2
        if k == p.k:
            row = int(np.searchsorted(positions, p.u))
            if row >= len(positions) or positions[row] != p.u or not 0 <= p.xi < h:
                raise KeyError(f"{p} is not in the subdictionary")
            return offset + row * h + p.xi
        offset += len(positions) * h
    raise KeyError(f"scale index {p.k} out of range")


def atom_from_index(sub: SubdictSpec, index: int) -> AtomParam:
    if index < 0:
        raise IndexError(index)
    for k, s in enumerate(sub.config.scales):
        positions = frame_positions(sub, k)
        h = s // 2
        size = len(positions) * h
        if index < size:
            row, xi = divmod(index, h)
            u = int(positions[row])
            return AtomParam(k, u, xi, canonical_shift(u, s))
        index -= size
    raise IndexError("atom index beyond the subdictionary size")


def brute_force_table(residual: np.ndarray, sub: SubdictSpec) -> dict[AtomParam, float]:
    """Naive inner products, one synthesized atom at a time (test oracle)."""
    out = {}
    for p in enumerate_atoms(sub):
        start, seg = atom_segment(p, sub.config)
        out[p] = float(residual[start:start + len(seg)] @ seg)
    return out
