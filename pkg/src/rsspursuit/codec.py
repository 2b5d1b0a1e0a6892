"""Bitstream coding of approximants.

Format (version 1).  Multi-byte integers are little-endian; the payload is an
MSB-first bit sequence padded with zero bits to a whole byte.

==============  =========  ===============================================
field           size       meaning
==============  =========  ===============================================
magic           4 bytes    ``b"RSSP"``
version         u8         1
variant         u8         0 MP, 1 OMP, 2 LoMP
dict_len        u16        length of the dictionary text
dict_text       bytes      ``DictConfig.to_text()`` (ASCII)
seq_kind        u8         :class:`SequenceKind`
seq_seed        u64
seq_refresh     u16        J
seq_subsample   u16        d
length          u32        N
sample_rate     u32
atom_count      u32
f_energy        f64        energy of the encoded reference
bits            u8         quantizer resolution B
alpha_max       f64        quantizer anchor
code_lengths    B x u8     Huffman code length of each weight category
payload_bits    u32        number of meaningful payload bits
payload         ...        one record per atom, in iteration order
==============  =========  ===============================================

Atom record ``n``:

* index of the atom within subdictionary ``n`` in ``ceil(log2 L_n)`` bits;
* LoMP only: refined time shift ``delta + s/4`` in ``ceil(log2(s/2 + 1))`` bits;
* weight symbol ``q``: Huffman code of its category ``c = bitlength(|q|)``,
  then for ``c > 0`` a sign bit and the ``c - 1`` low bits of ``|q|``.

Decoding sums ``dequantize(q_n) * atom_n`` in iteration order; the encoder
measures its SNR on exactly the same summation, so both sides agree to the
last bit.
"""

from __future__ import annotations

import heapq
import math
import struct
from dataclasses import dataclass, replace

import numpy as np

from .dictionary import AtomParam, DictConfig, atom_from_index, atom_index, atom_segment, dict_size
from .pursuit import Approximant, PursuitConfig, Variant, run
from .signal import Signal, _ratio_db
from .subseq import SequenceKind, SequenceSpec, subdict_at

MAGIC = b"RSSP"
VERSION = 1
_VARIANTS = (Variant.MP, Variant.OMP, Variant.LOMP)
_FIXED_HEAD = struct.Struct("<4sBBH")
_SEQ_HEAD = struct.Struct("<BQHHIIIdBd")
_U32 = struct.Struct("<I")


class DecodeError(ValueError):
    """Malformed, truncated or unsupported bitstream."""


# --------------------------------------------------------------------------
# bit I/O


class BitWriter:
    def __init__(self):
        self._parts: list[str] = []
        self.nbits = 0

    def write(self, value: int, width: int) -> None:
        if width == 0:
            return
        if value < 0 or value >> width:
            raise ValueError(f"{value} does not fit in {width} bits")
        self._parts.append(format(value, f"0{width}b"))
        self.nbits += width

    def to_bytes(self) -> bytes:
        bits = "".join(self._parts)
        bits += "0" * (-len(bits) % 8)
        return int(bits, 2).to_bytes(len(bits) // 8, "big") if bits else b""


class BitReader:
    def __init__(self, data: bytes, nbits: int):
        if nbits > 8 * len(data):
            raise DecodeError("payload shorter than announced")
        self._bits = "".join(format(b, "08b") for b in data)
        self.nbits = nbits
        self.pos = 0

    def read(self, width: int) -> int:
        if width == 0:
            return 0
        if self.pos + width > self.nbits:
            raise DecodeError("payload truncated")
        v = int(self._bits[self.pos:self.pos + width], 2)
        self.pos += width
        return v

    def padding_is_zero(self) -> bool:
        return "1" not in self._bits[self.nbits:]


# --------------------------------------------------------------------------
# canonical Huffman


def huffman_lengths(counts) -> list[int]:
    """Code lengths for symbol frequencies; unused symbols get length 0.

    Ties are broken by the smallest symbol so lengths are deterministic.
    """
    used = [(c, i) for i, c in enumerate(counts) if c > 0]
    lengths = [0] * len(counts)
    if len(used) == 1:
        lengths[used[0][1]] = 1
        return lengths
    heap = [(c, i, [i]) for c, i in used]
    heapq.heapify(heap)
    while len(heap) > 1:
        c1, t1, s1 = heapq.heappop(heap)
        c2, t2, s2 = heapq.heappop(heap)
        for s in s1 + s2:
            lengths[s] += 1
        heapq.heappush(heap, (c1 + c2, min(t1, t2), s1 + s2))
    return lengths


def canonical_codes(lengths) -> dict[int, tuple[int, int]]:
    """``symbol -> (code, length)`` in canonical order (length, symbol)."""
    order = sorted((ln, s) for s, ln in enumerate(lengths) if ln > 0)
    codes, code, prev = {}, 0, 0
    for ln, s in order:
        code <<= ln - prev
        codes[s] = (code, ln)
        code += 1
        prev = ln
    if code > 1 << prev:
        raise ValueError("code lengths violate the Kraft inequality")
    return codes


class _HuffmanDecoder:
    def __init__(self, lengths):
        try:
            codes = canonical_codes(lengths)
        except ValueError as exc:
            raise DecodeError(str(exc)) from exc
        self._table = {(ln, c): s for s, (c, ln) in codes.items()}
        self._max = max((ln for ln in lengths), default=0)

    def read(self, reader: BitReader) -> int:
        code = 0
        for ln in range(1, self._max + 1):
            code = (code << 1) | reader.read(1)
            sym = self._table.get((ln, code))
            if sym is not None:
                return sym
        raise DecodeError("invalid Huffman code")


# --------------------------------------------------------------------------
# quantizer


@dataclass(frozen=True)
class QuantizerSpec:
    """Uniform mid-tread quantizer with ``2^B - 1`` levels on ``[-a, a]``."""

    bits: int
    alpha_max: float

    def __post_init__(self):
        if not 2 <= self.bits <= 24:
            raise ValueError("quantizer resolution must be 2..24 bits")
        if not (math.isfinite(self.alpha_max) and self.alpha_max > 0):
            raise ValueError("alpha_max must be positive and finite")

    @property
    def step(self) -> float:
        return 2.0 * self.alpha_max / (2 ** self.bits - 1)

    @property
    def max_symbol(self) -> int:
        return 2 ** (self.bits - 1) - 1


def quantize_checked(alpha: float, q: QuantizerSpec) -> tuple[int, bool]:
    """Symbol of ``alpha`` and whether it fell outside the quantizer range."""
    if not math.isfinite(alpha):
        raise ValueError("cannot quantize a non-finite weight")
    x = abs(alpha) / q.step
    mag = math.floor(x + 0.5)
    clamped = x > q.max_symbol + 0.5
    mag = min(mag, q.max_symbol)
    return (-mag if alpha < 0 else mag), clamped


def quantize(alpha: float, q: QuantizerSpec) -> int:
    """Round half away from zero, clamped to ``[-(2^(B-1) - 1), 2^(B-1) - 1]``."""
    return quantize_checked(alpha, q)[0]


def dequantize(symbol: int, q: QuantizerSpec) -> float:
    return symbol * q.step


def _category(symbol: int) -> int:
    return abs(symbol).bit_length()


# --------------------------------------------------------------------------
# synthesis shared by encoder and decoder


def synthesize(params, weights, config: DictConfig) -> np.ndarray:
    """``sum_n w_n phi_n`` accumulated in the given order."""
    out = np.zeros(config.length)
    for p, w in zip(params, weights):
        start, seg = atom_segment(p, config)
        out[start:start + len(seg)] += w * seg
    return out


def _shift_width(s: int) -> int:
    return (s // 2).bit_length()  # ceil(log2(s/2 + 1)) for even s/2


def index_width(size: int) -> int:
    return (size - 1).bit_length() if size > 1 else 0


# --------------------------------------------------------------------------
# encoder


@dataclass(frozen=True)
class Bitstream:
    data: bytes
    header_bits: int
    index_bits: int
    shift_bits: int
    weight_bits: int
    padding_bits: int
    snr: float
    clamp_count: int
    n_atoms: int

    @property
    def total_bits(self) -> int:
        return 8 * len(self.data)


def _header(config: PursuitConfig, n_atoms, f_energy, sample_rate, q: QuantizerSpec,
            lengths, payload_bits) -> bytes:
    text = config.dictionary.to_text().encode("ascii")
    seq = config.sequence
    out = _FIXED_HEAD.pack(MAGIC, VERSION, _VARIANTS.index(config.variant), len(text)) + text
    out += _SEQ_HEAD.pack(int(seq.kind), seq.seed, seq.refresh, seq.subsample,
                          config.dictionary.length, sample_rate, n_atoms, f_energy,
                          q.bits, q.alpha_max)
    out += bytes(lengths) + _U32.pack(payload_bits)
    return out


def encode(approx: Approximant, config: PursuitConfig, bits: int = 12) -> Bitstream:
    """Serialize ``approx`` (decomposed with ``config``) with ``bits``-bit weights."""
    dcfg, seq = config.dictionary, config.sequence
    entries = approx.entries
    if len(entries) > 2 ** 32 - 1:
        raise ValueError("too many atoms for the bitstream format")
    amax = max((abs(e.weight) for e in entries), default=0.0)
    q = QuantizerSpec(bits, amax if amax > 0 else 1.0)
    symbols, clamps = [], 0
    for e in entries:
        sym, clamped = quantize_checked(e.weight, q)
        symbols.append(sym)
        clamps += clamped
    counts = [0] * bits
    for sym in symbols:
        counts[_category(sym)] += 1
    lengths = huffman_lengths(counts)
    codes = canonical_codes(lengths)

    w = BitWriter()
    index_bits = shift_bits = weight_bits = 0
    lomp = config.variant == Variant.LOMP
    for n, (e, sym) in enumerate(zip(entries, symbols)):
        if e.iteration != n or not isinstance(e.param, AtomParam):
            raise ValueError("entries must be time-frequency atoms in iteration order")
        sub = subdict_at(seq, dcfg, n)
        p = e.param
        coarse = AtomParam(p.k, p.u - e.shift, p.xi)
        width = index_width(dict_size(dcfg, sub))
        try:
            idx = atom_index(sub, coarse)
        except KeyError as exc:
            raise ValueError(f"atom {n} was not selected from subdictionary {n}") from exc
        w.write(idx, width)
        index_bits += width
        if lomp:
            s = dcfg.scales[p.k]
            sw = _shift_width(s)
            w.write(e.shift + s // 4, sw)
            shift_bits += sw
        elif e.shift:
            raise ValueError("only LoMP entries may carry a time shift")
        code, ln = codes[_category(sym)]
        w.write(code, ln)
        c = _category(sym)
        if c:
            w.write(int(sym < 0), 1)
            w.write(abs(sym) & ((1 << (c - 1)) - 1), c - 1)
        weight_bits += ln + c
    payload = w.to_bytes()
    f_energy = math.fsum(approx.reference * approx.reference)  # correctly rounded: platform-independent
    header = _header(config, len(entries), f_energy, approx.sample_rate, q, lengths, w.nbits)
    data = header + payload

    recon = synthesize([e.param for e in entries], [dequantize(s, q) for s in symbols], dcfg)
    resid = approx.reference - recon
    snr = _ratio_db(float(recon @ recon), float(resid @ resid))
    return Bitstream(data, 8 * len(header), index_bits, shift_bits, weight_bits,
                     8 * len(payload) - w.nbits, snr, clamps, len(entries))


# --------------------------------------------------------------------------
# decoder


@dataclass(frozen=True)
class Decoded:
    config: PursuitConfig
    quantizer: QuantizerSpec
    params: list[AtomParam]
    symbols: list[int]
    f_energy: float
    sample_rate: int
    signal: Signal | None

    @property
    def weights(self) -> list[float]:
        return [dequantize(s, self.quantizer) for s in self.symbols]


def decode_stream(data: bytes) -> Decoded:
    """Parse and reconstruct; any inconsistency raises :class:`DecodeError`."""
    data = bytes(data)
    try:
        magic, version, variant, tlen = _FIXED_HEAD.unpack_from(data, 0)
    except struct.error as exc:
        raise DecodeError("stream too short for a header") from exc
    if magic != MAGIC:
        raise DecodeError("bad magic")
    if version != VERSION:
        raise DecodeError(f"unsupported version {version}")
    if variant >= len(_VARIANTS):
        raise DecodeError(f"unknown variant {variant}")
    pos = _FIXED_HEAD.size
    try:
        text = data[pos:pos + tlen].decode("ascii")
        pos += tlen
        (kind, seed, refresh, subsample, N, rate, count, f_energy, bits,
         amax) = _SEQ_HEAD.unpack_from(data, pos)
        pos += _SEQ_HEAD.size
        lengths = list(data[pos:pos + bits])
        pos += bits
        (payload_bits,) = _U32.unpack_from(data, pos)
        pos += _U32.size
        dcfg = DictConfig.from_text(text)
        seq = SequenceSpec(SequenceKind(kind), seed, refresh, subsample)
        q = QuantizerSpec(bits, amax)
        config = PursuitConfig(dcfg, seq, _VARIANTS[variant], max_atoms=count)
    except (struct.error, UnicodeDecodeError, ValueError, KeyError) as exc:
        raise DecodeError(f"corrupt header: {exc}") from exc
    if len(lengths) != bits or dcfg.length != N:
        raise DecodeError("corrupt header")
    if not math.isfinite(f_energy) or f_energy < 0 or rate == 0:
        raise DecodeError("corrupt header")
    payload = data[pos:]
    if len(payload) != (payload_bits + 7) // 8:
        raise DecodeError("payload length does not match the header")
    reader = BitReader(payload, payload_bits)
    if not reader.padding_is_zero():
        raise DecodeError("non-zero padding bits")
    huff = _HuffmanDecoder(lengths) if count else None

    params, symbols = [], []
    lomp = config.variant == Variant.LOMP
    for n in range(count):
        sub = subdict_at(seq, dcfg, n)
        size = dict_size(dcfg, sub)
        idx = reader.read(index_width(size))
        if idx >= size:
            raise DecodeError(f"atom index {idx} outside subdictionary of size {size}")
        p = atom_from_index(sub, idx)
        if lomp:
            s = dcfg.scales[p.k]
            shift = reader.read(_shift_width(s)) - s // 4
            if abs(shift) > s // 4 or not 0 <= p.u + shift < N:
                raise DecodeError("invalid time shift")
            u = p.u + shift
            p = replace(p, u=u, tau=(u + s // 4) % (s // 2) - s // 4)
        c = huff.read(reader)
        if c:
            neg = reader.read(1)
            mag = (1 << (c - 1)) | reader.read(c - 1)
            if mag > q.max_symbol:
                raise DecodeError("weight symbol out of range")
            sym = -mag if neg else mag
        else:
            sym = 0
        params.append(p)
        symbols.append(sym)
    if reader.pos != payload_bits:
        raise DecodeError("trailing payload bits")
    try:
        x = synthesize(params, [dequantize(s, q) for s in symbols], dcfg)
    except ValueError as exc:
        raise DecodeError(str(exc)) from exc
    return Decoded(config, q, params, symbols, f_energy, rate, Signal(x, rate))


def decode(data) -> Signal:
    if isinstance(data, Bitstream):
        data = data.data
    return decode_stream(data).signal


# --------------------------------------------------------------------------
# rate-distortion


def truncate(approx: Approximant, n: int) -> Approximant:
    """The first ``n`` atoms of an MP/LoMP approximant (weights are unchanged)."""
    if not 0 <= n <= approx.n_atoms:
        raise ValueError("prefix length out of range")
    return Approximant(approx.entries[:n], approx.reference, None, approx.trace[:n + 1],
                       approx.srr_trace[:n + 1], "truncated", approx.sample_rate)


@dataclass(frozen=True)
class RatePoint:
    target_srr: float | None
    n_atoms: int
    bits: int
    snr: float
    srr: float


def rate_distortion_curve(f, config: PursuitConfig, srr_targets, bits: int = 12,
                          include_zero: bool = True) -> list[RatePoint]:
    """Bits and decoded SNR for each SRR target, from a single decomposition.

    MP and LoMP share a greedy path, so lower targets are prefixes of the run
    to the highest one.  OMP re-fits weights and is rerun per target.
    """
    targets = sorted(float(t) for t in srr_targets)
    points = []
    if config.variant == Variant.OMP:
        runs = [(t, run(f, replace(config, target_srr=t))) for t in targets]
    else:
        full = run(f, replace(config, target_srr=max(targets)) if targets else config)
        runs = []
        for t in targets:
            n = next((i for i, v in enumerate(full.srr_trace) if v >= t), len(full.srr_trace) - 1)
            runs.append((t, truncate(full, n)))
    if include_zero:
        first = runs[0][1] if runs else run(f, replace(config, max_atoms=0))
        runs.insert(0, (None, truncate(first, 0) if first.n_atoms else first))
    for t, a in runs:
        bs = encode(a, config, bits)
        points.append(RatePoint(t, a.n_atoms, bs.total_bits, decode_snr(bs.data, a.reference),
                                a.srr_trace[-1]))
    return points


def decode_snr(data: bytes, reference) -> float:
    """SNR of the decoded stream against ``reference``."""
    x = decode(data).samples
    ref = np.asarray(getattr(reference, "samples", reference), dtype=np.float64)
    r = ref - x
    return _ratio_db(float(x @ x), float(r @ r))
