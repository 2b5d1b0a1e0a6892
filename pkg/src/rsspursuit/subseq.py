"""Signal-independent sequences of subdictionaries.

The sequence is a pure function of ``(kind, seed, refresh, subsample)`` and
the iteration number, so an encoder and a decoder holding the same
:class:`SequenceSpec` regenerate identical subdictionaries without exchanging
them.

Shifts live in ``[-s/4, s/4)``.  STEP and JUMP are defined by the recurrences
``t <- (t + 1) mod s/2`` and ``t <- (t + s/4 - 1) mod s/2`` from ``t = 0``; the
closed forms ``(b * step) mod s/2`` are used so any block ``b`` can be
evaluated directly.  Raw values at or above ``s/4`` wrap to ``raw - s/2``,
which keeps the same frame grid (shifts only matter modulo ``s/2``).
"""

from __future__ import annotations

import array
import enum
import hashlib
import sys
from dataclasses import dataclass

from .dictionary import DictConfig, SubdictSpec
from .prng import Xoshiro256


class SequenceKind(enum.IntEnum):
    FIXED = 0
    RANDOM = 1
    STEP = 2
    JUMP = 3


@dataclass(frozen=True)
class SequenceSpec:
    kind: SequenceKind = SequenceKind.FIXED
    seed: int = 0
    refresh: int = 1
    subsample: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", SequenceKind(self.kind))
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if not 1 <= self.refresh < 2**16:
            raise ValueError("refresh period must be in [1, 65535]")
        if not 1 <= self.subsample < 2**16:
            raise ValueError("subsample factor must be in [1, 65535]")

    def block(self, iteration: int) -> int:
        if iteration < 0:
            raise ValueError("iteration must be non-negative")
        return iteration // self.refresh


def _wrap(raw: int, s: int) -> int:
    return raw if raw < s // 4 else raw - s // 2


def _draws(spec: SequenceSpec, block: int, k: int, s: int) -> tuple[int, int]:
    g = Xoshiro256.substream(spec.seed, block, k)
    tau = g.below(s // 2) - s // 4
    phase = g.below(spec.subsample) if spec.subsample > 1 else 0
    return tau, phase


def shift_at(spec: SequenceSpec, scales, iteration: int, k: int) -> int:
    """Time shift of scale ``k`` at ``iteration``.

    ``scales`` is the scale tuple (or a :class:`DictConfig`).
    """
    if isinstance(scales, DictConfig):
        scales = scales.scales
    s = scales[k]
    b = spec.block(iteration)
    if spec.kind == SequenceKind.FIXED:
        return 0
    if spec.kind == SequenceKind.RANDOM:
        return _draws(spec, b, k, s)[0]
    step = 1 if spec.kind == SequenceKind.STEP else s // 4 - 1
    return _wrap((b * step) % (s // 2), s)


def phase_at(spec: SequenceSpec, scales, iteration: int, k: int) -> int:
    """Frame decimation phase in ``[0, subsample)``; random only for RANDOM."""
    if spec.kind != SequenceKind.RANDOM or spec.subsample == 1:
        return 0
    if isinstance(scales, DictConfig):
        scales = scales.scales
    return _draws(spec, spec.block(iteration), k, scales[k])[1]


def subdict_at(spec: SequenceSpec, config: DictConfig, iteration: int) -> SubdictSpec:
    K = config.n_scales
    if spec.kind == SequenceKind.RANDOM:
        b = spec.block(iteration)
        draws = [_draws(spec, b, k, s) for k, s in enumerate(config.scales)]
        shifts = tuple(t for t, _ in draws)
        phases = tuple(p for _, p in draws)
    else:
        shifts = tuple(shift_at(spec, config.scales, iteration, k) for k in range(K))
        phases = (0,) * K
    return SubdictSpec(config, shifts, spec.subsample, phases)


def shift_digest(spec: SequenceSpec, scales, n_iters: int) -> str:
    """SHA-256 over ``tau_k^i`` as little-endian int32, ``i``-major then ``k``."""
    if isinstance(scales, DictConfig):
        scales = scales.scales
    h = hashlib.sha256()
    K = len(scales)
    buf = array.array("i", bytes(4 * K))
    for i in range(n_iters):
        for k in range(K):
            buf[k] = shift_at(spec, scales, i, k)
        h.update(buf.tobytes() if sys.byteorder == "little" else _swapped(buf))
    return h.hexdigest()


def _swapped(buf: array.array) -> bytes:
    b = array.array(buf.typecode, buf)
    b.byteswap()
    return b.tobytes()
