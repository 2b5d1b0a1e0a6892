"""Greedy pursuits over sequences of subdictionaries.

Every iteration ``n`` asks a *source* for the coefficient table of the
current residual on the iteration's subdictionary, selects the largest
magnitude, and updates the residual (MP and LoMP subtract the atom, OMP
re-projects onto the span of all selected atoms).

A source is any object providing::

    table(n, residual, changed) -> table with argmax(exclude=())
    segment(key)                -> (start, unit-norm samples)
    vector(key)                 -> full-length unit-norm atom
    refine(key, residual)       -> refined key            (LoMP only)

``changed`` is the ``(lo, hi)`` sample range touched by the previous update,
or ``None``; a source may use it to refresh cached projections when the
subdictionary did not change.  :class:`TFSource` wraps the time-frequency
dictionaries and :class:`MatrixSource` explicit atom matrices.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.signal

from .dictionary import (AtomParam, DictConfig, ExactRepresentation, SubdictSpec, atom,
                         atom_segment, canonical_shift, kernel_for, project)
from .signal import Signal, _ratio_db
from .subseq import SequenceSpec, subdict_at


class Variant(enum.Enum):
    MP = "mp"
    OMP = "omp"
    LOMP = "lomp"


class DependentAtomError(ValueError):
    """The candidate atom is numerically inside the span of the selected ones."""


@dataclass(frozen=True)
class PursuitConfig:
    dictionary: DictConfig
    sequence: SequenceSpec = field(default_factory=SequenceSpec)
    variant: Variant = Variant.MP
    target_srr: float | None = None
    max_atoms: int | None = None
    residual_floor: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.target_srr is None and self.max_atoms is None:
            raise ValueError("give a target SRR, an atom budget, or both")
        if self.max_atoms is not None and self.max_atoms < 0:
            raise ValueError("max_atoms must be non-negative")
        if (self.variant == Variant.OMP and self.max_atoms is not None
                and self.max_atoms > self.dictionary.length):
            raise ValueError("OMP cannot select more atoms than the signal dimension")


@dataclass(frozen=True)
class Entry:
    param: object
    weight: float
    iteration: int
    shift: int = 0  # LoMP: refined time minus the coarse-grid time


@dataclass
class Approximant:
    entries: list[Entry]
    reference: np.ndarray
    residual: np.ndarray
    trace: list[float]
    srr_trace: list[float]
    status: str
    sample_rate: int = 32000

    @property
    def reference_energy(self) -> float:
        return self.trace[0]

    @property
    def n_atoms(self) -> int:
        return len(self.entries)

    @property
    def budget_exhausted(self) -> bool:
        return self.status == "budget_exhausted"

    def approximation(self) -> np.ndarray:
        return self.reference - self.residual

    def srr(self) -> float:
        return self.srr_trace[-1]


# --------------------------------------------------------------------------
# elementary steps


def select_atom(table) -> tuple[object, float]:
    """Entry of largest magnitude, ties going to the smallest key.

    ``table`` is a coefficient table (anything with ``argmax``) or a mapping
    from keys to inner products.  Raises :class:`ExactRepresentation` when all
    coefficients are zero.
    """
    if hasattr(table, "argmax"):
        return table.argmax()
    if not isinstance(table, Mapping) or not table:
        raise ValueError("empty coefficient table")
    best_key, best = None, -1.0
    for key in sorted(table):
        mag = abs(table[key])
        if mag > best:
            best_key, best = key, mag
    if best <= 0.0:
        raise ExactRepresentation("all coefficients vanish")
    return best_key, float(table[best_key])


def mp_update(residual: np.ndarray, atom_vec: np.ndarray, weight: float | None = None) -> np.ndarray:
    """``R - alpha * phi``; ``alpha`` defaults to ``<R, phi>``."""
    r = np.asarray(residual, dtype=np.float64)
    phi = np.asarray(atom_vec, dtype=np.float64)
    alpha = float(r @ phi) if weight is None else weight
    return r - alpha * phi


class IncrementalQR:
    """Thin QR of the selected atoms, grown one column at a time.

    Each new column is orthogonalized twice against the current ``Q``
    (classical Gram-Schmidt with reorthogonalization).
    """

    def __init__(self, dim: int, capacity: int = 16, tol: float = 1e-10):
        self.dim, self.tol, self.size = dim, tol, 0
        self.Q = np.empty((capacity, dim))
        self.R = np.zeros((capacity, capacity))

    def _grow(self):
        cap = 2 * self.Q.shape[0]
        Q, R = np.empty((cap, self.dim)), np.zeros((cap, cap))
        Q[: self.size] = self.Q[: self.size]
        R[: self.size, : self.size] = self.R[: self.size, : self.size]
        self.Q, self.R = Q, R

    def add(self, phi: np.ndarray) -> np.ndarray:
        m = self.size
        Q = self.Q[:m]
        c1 = Q @ phi
        v = phi - c1 @ Q
        c2 = Q @ v
        v -= c2 @ Q
        rho = math.sqrt(float(v @ v))
        if rho < self.tol * math.sqrt(float(phi @ phi)):
            raise DependentAtomError(f"pivot {rho:.3e} below {self.tol:g}")
        if m == self.Q.shape[0]:
            self._grow()
        q = v / rho
        self.Q[m] = q
        self.R[:m, m] = c1 + c2
        self.R[m, m] = rho
        self.size = m + 1
        return q

    def solve(self, f: np.ndarray) -> np.ndarray:
        m = self.size
        if m == 0:
            return np.zeros(0)
        z = self.Q[:m] @ f
        return scipy.linalg.solve_triangular(self.R[:m, :m], z)


def omp_update(selected: Sequence[np.ndarray], f) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares weights of ``f`` on ``selected`` and the orthogonal residual."""
    x = np.asarray(getattr(f, "samples", f), dtype=np.float64)
    qr = IncrementalQR(x.size, max(1, len(selected)))
    r = x.copy()
    for phi in selected:
        q = qr.add(np.asarray(phi, dtype=np.float64))
        r -= q * float(q @ r)
    return qr.solve(x), r


def _refine_scan(param: AtomParam, residual: np.ndarray, config: DictConfig):
    kern = kernel_for(config, param.k)
    s, h, q, N = kern.s, kern.h, kern.s // 4, config.length
    lo, hi = max(0, param.u - q), min(N - 1, param.u + q)
    taps = kern.kernel(param.xi)
    padded = np.zeros(N + 2 * h)
    padded[h:h + N] = residual
    corr = scipy.signal.correlate(padded[lo:hi + s], taps, mode="valid")
    cands = np.arange(lo, hi + 1)
    prefix = np.concatenate([[0.0], np.cumsum(taps * taps)])
    a = np.maximum(0, h - cands)
    b = np.minimum(s, N - cands + h)
    norms = np.sqrt(prefix[b] - prefix[a])
    score = np.zeros_like(corr)
    ok = norms > 1e-12
    score[ok] = np.abs(corr[ok]) / norms[ok]
    return cands, score


def lomp_refine(param: AtomParam, residual, config: DictConfig) -> AtomParam:
    """Best integer time within ``s/4`` of ``param.u`` in the full dictionary."""
    r = np.asarray(getattr(residual, "samples", residual), dtype=np.float64)
    cands, score = _refine_scan(param, r, config)
    orig = param.u - int(cands[0])
    best = int(np.argmax(score))
    if score[best] <= score[orig]:
        return param
    u = int(cands[best])
    return AtomParam(param.k, u, param.xi, canonical_shift(u, config.scales[param.k]))


# --------------------------------------------------------------------------
# coefficient sources


class TFSource:
    """Time-frequency dictionary driven by a subdictionary sequence.

    With ``full=True`` the sequence is ignored and every iteration searches
    the whole dictionary (Full MP).
    """

    def __init__(self, config: DictConfig, sequence: SequenceSpec | None = None, full: bool = False):
        self.config = config
        self.sequence = SequenceSpec() if sequence is None else sequence
        self.full = full
        self._table = None

    def table(self, n: int, residual: np.ndarray, changed):
        sub = SubdictSpec.full(self.config) if self.full else subdict_at(self.sequence, self.config, n)
        if changed is not None and self._table is not None and self._table.sub == sub:
            self._table.refresh(residual, *changed)
        else:
            self._table = project(residual, sub)
        return self._table

    def segment(self, key: AtomParam):
        return atom_segment(key, self.config)

    def vector(self, key: AtomParam) -> np.ndarray:
        return atom(key, self.config)

    def refine(self, key: AtomParam, residual: np.ndarray) -> AtomParam:
        return lomp_refine(key, residual, self.config)


class VectorTable:
    """Coefficients indexed by integer keys (sorted ascending)."""

    def __init__(self, keys: np.ndarray, values: np.ndarray):
        self.keys, self.values = keys, values

    def __len__(self) -> int:
        return len(self.keys)

    def argmax(self, exclude=()):
        mag = np.abs(self.values)
        if len(exclude):
            mag = mag.copy()
            mag[np.isin(self.keys, list(exclude))] = -1.0
        i = int(np.argmax(mag))
        if mag[i] <= 0.0:
            raise ExactRepresentation("all coefficients vanish")
        return int(self.keys[i]), float(self.values[i])


class MatrixSource:
    """Explicit dictionary with unit-norm columns.

    ``subsets`` is ``None`` for the whole dictionary, a 1-D index array for a
    fixed subdictionary, or a 2-D array whose row ``n`` (modulo its length)
    lists the columns available at iteration ``n``.
    """

    def __init__(self, atoms: np.ndarray, subsets: np.ndarray | None = None):
        self.atoms = np.asarray(atoms, dtype=np.float64)
        self.subsets = None if subsets is None else np.sort(np.asarray(subsets), axis=-1)

    def table(self, n: int, residual: np.ndarray, changed):
        if self.subsets is None:
            return VectorTable(np.arange(self.atoms.shape[1]), self.atoms.T @ residual)
        idx = self.subsets if self.subsets.ndim == 1 else self.subsets[n % len(self.subsets)]
        return VectorTable(idx, self.atoms[:, idx].T @ residual)

    def segment(self, key: int):
        return 0, self.atoms[:, key]

    def vector(self, key: int) -> np.ndarray:
        return self.atoms[:, key]

    def refine(self, key, residual):
        return key


# --------------------------------------------------------------------------
# driver


def _omp_select(table, source, qr: IncrementalQR):
    rejected = []
    while True:
        key, _ = table.argmax(rejected)
        try:
            return key, qr.add(source.vector(key))
        except DependentAtomError:
            rejected.append(key)


def pursue(f, source, variant=Variant.MP, *, target_srr: float | None = None,
           max_atoms: int | None = None, residual_floor: float = 1e-12,
           sample_rate: int = 32000) -> Approximant:
    """Run a greedy decomposition of ``f`` against ``source``."""
    variant = Variant(variant)
    x = np.array(getattr(f, "samples", f), dtype=np.float64)
    sample_rate = getattr(f, "sample_rate", sample_rate)
    ref_energy = float(x @ x)
    if ref_energy == 0.0:
        raise ValueError("cannot decompose a zero signal")
    N = x.size
    r = x.copy()
    fn = np.zeros(N)
    trace, srr_trace = [ref_energy], [-math.inf]
    entries: list[Entry] = []
    qr = IncrementalQR(N) if variant == Variant.OMP else None
    changed = None
    n = 0
    while True:
        if target_srr is not None and srr_trace[-1] >= target_srr:
            status = "target_reached"
            break
        if trace[-1] <= residual_floor * ref_energy:
            status = "floor_reached"
            break
        if max_atoms is not None and n >= max_atoms:
            status = "budget_exhausted"
            break
        if qr is not None and n >= N:
            status = "complete"
            break
        table = source.table(n, r, changed)
        try:
            if qr is not None:
                key, q = _omp_select(table, source, qr)
            else:
                key, _ = select_atom(table)
        except ExactRepresentation:
            status = "exact"
            break
        if qr is not None:
            step = q * float(q @ r)
            r -= step
            fn += step
            entries.append(Entry(key, math.nan, n))
            changed = None
        else:
            shift = 0
            if variant == Variant.LOMP:
                refined = source.refine(key, r)
                shift = refined.u - key.u
                key = refined
            start, seg = source.segment(key)
            stop = start + len(seg)
            alpha = float(r[start:stop] @ seg)
            r[start:stop] -= alpha * seg
            fn[start:stop] += alpha * seg
            entries.append(Entry(key, alpha, n, shift))
            changed = (start, stop)
        e = float(r @ r)
        trace.append(e)
        srr_trace.append(_ratio_db(float(fn @ fn), e))
        n += 1
    if qr is not None and entries:
        weights = qr.solve(x)
        entries = [replace(en, weight=float(w)) for en, w in zip(entries, weights)]
    return Approximant(entries, x, r, trace, srr_trace, status, sample_rate)


def run(f, config: PursuitConfig) -> Approximant:
    """Decompose ``f`` with the dictionary and sequence of ``config``."""
    x = getattr(f, "samples", f)
    if len(x) != config.dictionary.length:
        raise ValueError(f"signal length {len(x)} != dictionary length {config.dictionary.length}")
    source = TFSource(config.dictionary, config.sequence)
    return pursue(f, source, config.variant, target_srr=config.target_srr,
                  max_atoms=config.max_atoms, residual_floor=config.residual_floor)


def write_trace_csv(path, approx: Approximant, config: PursuitConfig | None = None) -> None:
    """One row per selected atom: iteration, scale, u, xi, tau, alpha, energy, SRR."""
    with open(path, "w", newline="") as fh:
        if config is not None:
            fh.write(f"# dictionary={config.dictionary.to_text()}\n")
            seq = config.sequence
            fh.write(f"# sequence=kind={seq.kind.name.lower()};seed={seq.seed};"
                     f"refresh={seq.refresh};subsample={seq.subsample}\n")
            fh.write(f"# variant={config.variant.value}\n")
        w = csv.writer(fh)
        w.writerow(["iteration", "scale", "u", "xi", "tau", "alpha", "residual_energy", "srr_db"])
        for en in approx.entries:
            p = en.param
            if isinstance(p, AtomParam):
                scale, u, xi, tau = p.k, p.u, p.xi, p.tau
            else:
                scale, u, xi, tau = "", p, "", ""
            w.writerow([en.iteration, scale, u, xi, tau, repr(en.weight),
                        repr(approx.trace[en.iteration + 1]),
                        repr(approx.srr_trace[en.iteration + 1])])


def as_signal(approx: Approximant) -> Signal:
    return Signal(approx.approximation(), approx.sample_rate)
