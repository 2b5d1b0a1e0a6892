"""Desk-scale reproductions of the decay, order-statistics and coding studies.

Each ``exp_*`` function returns its numbers and, given ``out``, writes a CSV
whose leading ``# key=value`` lines record the full configuration.  All
randomness flows from ``seed`` through :func:`numpy_rng` substreams, so output
is byte-identical for a given seed (wall-clock columns excepted).
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codec import encode, rate_distortion_curve
from .dictionary import DictConfig, Family, Window
from .orderstats import (Distribution, model_energy, order_pdf, predict_fixed, predict_redraw,
                         predict_variance, simulate_greedy)
from .prng import numpy_rng, substream_key
from .pursuit import MatrixSource, PursuitConfig, TFSource, Variant, pursue, run
from .signal import load_wav
from .subseq import SequenceKind, SequenceSpec
from .synth import audio_like, sparse_tf_signal, unit_sphere_dictionary

AUDIO_SCALES_3 = (128, 1024, 8192)
AUDIO_SCALES_8 = (128, 256, 512, 1024, 2048, 4096, 8192, 16384)

# stream tags for numpy_rng(seed, tag, trial)
_SIGNAL, _SEQUENCE, _SUBSETS = 0, 1, 2


def _write_csv(out, meta: dict, header: list[str], rows) -> None:
    if out is None:
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for key, value in meta.items():
            fh.write(f"# {key}={value}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _padded(trace, n_iters: int) -> np.ndarray:
    t = np.asarray(trace[:n_iters + 1], dtype=np.float64)
    if len(t) < n_iters + 1:
        t = np.concatenate([t, np.full(n_iters + 1 - len(t), t[-1])])
    return t


@dataclass
class DecayResult:
    """Relative residual energies ``eps[name]`` of shape (trials, n_iters + 1)."""

    eps: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def mean(self, name: str) -> np.ndarray:
        return self.eps[name].mean(axis=0)

    def stderr(self, name: str) -> np.ndarray:
        e = self.eps[name]
        return e.std(axis=0, ddof=1) / math.sqrt(len(e)) if len(e) > 1 else np.zeros(e.shape[1])


# --------------------------------------------------------------------------
# sparse Gabor toy


def exp_toy_gabor(seed: int = 0, N: int = 2048, m: int = 60, scales=(32, 128, 512),
                  trials: int = 100, n_iters: int | None = None, window: Window = Window.HANN,
                  signal_seed: int | None = None, out=None) -> DecayResult:
    """Coarse, RSS and Full MP on ``m``-sparse Gabor signals.

    Signals come from ``signal_seed`` (default ``seed``) and RSS sequences
    from ``seed``, so the Coarse and Full curves only depend on the former.
    """
    if not 0 < m < N:
        raise ValueError("need 0 < m < N")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n_iters = m if n_iters is None else n_iters
    signal_seed = seed if signal_seed is None else signal_seed
    config = DictConfig(tuple(scales), N, Family.GABOR, window)
    eps = {"coarse": [], "rss": [], "full": []}
    for t in range(trials):
        x, _, _ = sparse_tf_signal(config, m, numpy_rng(signal_seed, _SIGNAL, t))
        energy = float(x @ x)
        rss = SequenceSpec(SequenceKind.RANDOM, substream_key(seed, _SEQUENCE, t))
        sources = {"coarse": TFSource(config), "rss": TFSource(config, rss),
                   "full": TFSource(config, full=True)}
        for name, src in sources.items():
            a = pursue(x, src, Variant.MP, max_atoms=n_iters)
            eps[name].append(_padded(a.trace, n_iters) / energy)
    res = DecayResult({k: np.array(v) for k, v in eps.items()},
                      {"experiment": "toy-gabor", "seed": seed, "signal_seed": signal_seed,
                       "trials": trials, "m": m, "n_iters": n_iters,
                       "dictionary": config.to_text()})
    names = list(eps)
    header = ["n"] + [f"{a}_{b}" for a in names for b in ("mean", "var")]
    rows = []
    for n in range(n_iters + 1):
        row = [n]
        for a in names:
            col = res.eps[a][:, n]
            row += [col.mean(), col.var(ddof=1) if trials > 1 else 0.0]
        rows.append(row)
    _write_csv(out, res.meta, header, rows)
    return res


# --------------------------------------------------------------------------
# order statistics


@dataclass
class OrderStatsResult:
    dist: Distribution
    M: int
    f_energy: float
    predicted: dict[str, np.ndarray]
    predicted_var: dict[str, np.ndarray]
    simulated: dict
    pdf_grid: np.ndarray
    pdfs: dict[str, np.ndarray]


def make_distribution(name: str) -> Distribution:
    name = name.lower()
    aliases = {"uniform": "uniform", "halfnormal": "halfnormal", "normal": "halfnormal",
               "exponential": "exponential", "exp": "exponential"}
    if name not in aliases:
        raise ValueError(f"unknown distribution {name!r}")
    return Distribution(aliases[name])


def exp_orderstats(dist="uniform", M: int = 100, trials: int = 100_000, seed: int = 0,
                   n_iters: int | None = None, out=None) -> OrderStatsResult:
    """Densities of the maximum and the ``M/2``-th order statistic, and the
    predicted and simulated residual decay of both strategies."""
    dist = make_distribution(dist) if isinstance(dist, str) else dist
    n_iters = M // 2 if n_iters is None else n_iters
    f_energy = model_energy(dist, M)
    pred = {"fixed": predict_fixed(dist, M, n_iters).values,
            "redraw": predict_redraw(dist, M, n_iters).values}
    pvar = {"fixed": predict_variance(dist, M, n_iters, "fixed", trials=trials,
                                      seed=substream_key(seed, 1)).values,
            "redraw": predict_variance(dist, M, n_iters, "redraw").values}
    sims = {s: simulate_greedy(dist, M, n_iters, s, trials, substream_key(seed, 0)) for s in pred}
    hi = float(dist.isf(1e-6 / M))
    grid = np.linspace(0.0, hi, 201)
    pdfs = {"pdf": dist.pdf(grid), "pdf_max": order_pdf(dist, M, M, grid),
            "pdf_mid": order_pdf(dist, M // 2, M, grid)}
    res = OrderStatsResult(dist, M, f_energy, pred, pvar, sims, grid, pdfs)
    meta = {"experiment": "orderstats", "dist": dist.kind, "scale": dist.scale, "M": M,
            "trials": trials, "seed": seed, "f_energy": f_energy}
    rows = []
    for s in pred:
        sim = sims[s]
        for n in range(n_iters + 1):
            rows.append([s, n, pred[s][n], pvar[s][n], sim.mean[n], sim.var[n],
                         sim.mean_stderr[n], sim.clamp_count])
    _write_csv(out, meta, ["strategy", "n", "predicted_mean", "predicted_var", "mc_mean",
                           "mc_var", "mc_stderr", "clamp_count"], rows)
    if out is not None:
        pdf_out = Path(out).with_name(Path(out).stem + "_pdf.csv")
        _write_csv(pdf_out, meta, ["z", "pdf", "pdf_max", "pdf_mid"],
                   zip(grid, pdfs["pdf"], pdfs["pdf_max"], pdfs["pdf_mid"]))
    return res


# --------------------------------------------------------------------------
# random dictionaries, MP vs OMP


def exp_omp_random(trials: int = 1000, seed: int = 0, N: int = 128, M: int = 256,
                   components: int = 64, subdict: int = 64, n_iters: int = 64,
                   out=None) -> DecayResult:
    """MP and OMP with a fixed, a random sequence of, and the full set of columns."""
    eps: dict[str, list] = {f"{a}_{v}": [] for a in ("coarse", "rss", "full") for v in ("mp", "omp")}
    for t in range(trials):
        rng = numpy_rng(seed, _SIGNAL, t)
        A = unit_sphere_dictionary(N, M, rng)
        support = rng.choice(M, components, replace=False)
        x = A[:, support] @ rng.standard_normal(components)
        energy = float(x @ x)
        sub_rng = numpy_rng(seed, _SUBSETS, t)
        coarse = sub_rng.choice(M, subdict, replace=False)
        seq = np.array([sub_rng.choice(M, subdict, replace=False) for _ in range(n_iters)])
        sources = {"coarse": MatrixSource(A, coarse), "rss": MatrixSource(A, seq),
                   "full": MatrixSource(A)}
        for name, src in sources.items():
            for v in (Variant.MP, Variant.OMP):
                a = pursue(x, src, v, max_atoms=n_iters)
                eps[f"{name}_{v.value}"].append(_padded(a.trace, n_iters) / energy)
    res = DecayResult({k: np.array(v) for k, v in eps.items()},
                      {"experiment": "omp-random", "seed": seed, "trials": trials, "N": N,
                       "M": M, "components": components, "subdict": subdict,
                       "n_iters": n_iters})
    names = list(eps)
    rows = [[n] + [res.eps[k][:, n].mean() for k in names] for n in range(n_iters + 1)]
    _write_csv(out, res.meta, ["n"] + [f"{k}_mean" for k in names], rows)
    return res


# --------------------------------------------------------------------------
# audio coding


CODING_ALGORITHMS = ("coarse_mp", "rss_mp", "lomp")


def coding_config(algorithm: str, config: DictConfig, seed: int, srr_target: float,
                  subsample: int = 1, refresh: int = 1) -> PursuitConfig:
    if algorithm == "coarse_mp":
        return PursuitConfig(config, SequenceSpec(), Variant.MP, target_srr=srr_target)
    if algorithm == "lomp":
        return PursuitConfig(config, SequenceSpec(), Variant.LOMP, target_srr=srr_target)
    if algorithm == "rss_mp":
        seq = SequenceSpec(SequenceKind.RANDOM, seed, refresh, subsample)
        return PursuitConfig(config, seq, Variant.MP, target_srr=srr_target)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _audio_inputs(wav, seeds, N, sample_rate=32000):
    if wav is not None:
        sig = load_wav(wav)
        return [(0, sig.samples, sig.sample_rate)]
    return [(s, audio_like(N, numpy_rng(s, _SIGNAL, 0), sample_rate), sample_rate) for s in seeds]


@dataclass
class CodingRow:
    seed: int
    algorithm: str
    target_srr: float | None
    n_atoms: int
    bits: int
    snr: float
    srr: float


def exp_coding(wav=None, seeds=range(20), N: int = 32768, scales=AUDIO_SCALES_8,
               srr_targets=(10.0,), bits: int = 12, algorithms=CODING_ALGORITHMS,
               out=None) -> list[CodingRow]:
    """Atoms, bits and decoded SNR at each SRR target for each algorithm."""
    rows = []
    for seed, x, _rate in _audio_inputs(wav, seeds, N):
        config = DictConfig(tuple(scales), len(x))
        for alg in algorithms:
            pc = coding_config(alg, config, substream_key(seed, _SEQUENCE), max(srr_targets))
            for p in rate_distortion_curve(x, pc, srr_targets, bits, include_zero=False):
                rows.append(CodingRow(seed, alg, p.target_srr, p.n_atoms, p.bits, p.snr, p.srr))
    meta = {"experiment": "coding", "input": wav or "synthetic", "N": N,
            "scales": ",".join(map(str, scales)), "bits_weight": bits,
            "srr_targets": ",".join(map(str, srr_targets))}
    _write_csv(out, meta, ["seed", "algorithm", "target_srr", "n_atoms", "bits", "snr_db", "srr_db"],
               [[r.seed, r.algorithm, r.target_srr, r.n_atoms, r.bits, r.snr, r.srr] for r in rows])
    return rows


@dataclass
class TradeoffRow:
    subsample: int
    n_atoms: int
    bits: int
    seconds: float
    relative_time: float


def _timed_run(x, pc: PursuitConfig, repeats: int):
    best, approx = math.inf, None
    for _ in range(repeats):
        t0 = time.perf_counter()
        approx = run(x, pc)
        best = min(best, time.perf_counter() - t0)
    return approx, best


def exp_tradeoff(factors=(1, 2, 4, 8, 16, 32), wav=None, seed: int = 0, N: int = 262144,
                 scales=AUDIO_SCALES_3, srr_target: float = 10.0, bits: int = 12,
                 repeats: int = 1, out=None) -> list[TradeoffRow]:
    """RSS MP with frame-grid decimation ``d``: bits at the SRR target and
    decomposition time relative to Coarse MP (best of ``repeats``)."""
    (_, x, _), = _audio_inputs(wav, [seed], N)
    config = DictConfig(tuple(scales), len(x))
    ref_pc = coding_config("coarse_mp", config, 0, srr_target)
    _, ref_time = _timed_run(x, ref_pc, repeats)
    rows = []
    for d in factors:
        pc = coding_config("rss_mp", config, substream_key(seed, _SEQUENCE), srr_target, subsample=d)
        approx, secs = _timed_run(x, pc, repeats)
        rows.append(TradeoffRow(d, approx.n_atoms, encode(approx, pc, bits).total_bits, secs,
                                secs / ref_time))
    meta = {"experiment": "tradeoff", "input": wav or "synthetic", "seed": seed, "N": len(x),
            "scales": ",".join(map(str, scales)), "srr_target": srr_target,
            "bits_weight": bits, "coarse_seconds": ref_time}
    _write_csv(out, meta, ["subsample", "n_atoms", "bits", "seconds", "relative_time"],
               [[r.subsample, r.n_atoms, r.bits, r.seconds, r.relative_time] for r in rows])
    return rows
