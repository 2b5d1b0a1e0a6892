"""Order statistics of projection magnitudes and greedy decay predictors.

The model treats the ``M`` projection magnitudes of a residual on a
quasi-incoherent dictionary as i.i.d. draws of a non-negative variable ``Z``.
With a fixed dictionary, iteration ``n`` removes the square of the
``(M-n)``-th order statistic; when the dictionary is redrawn every iteration,
each step removes the square of the maximum of fresh draws scaled to the
current residual norm.

The signal energy is a free normalization.  Unless given, it defaults to the
model-consistent value ``M * E[Z^2]`` (the energy captured by all ``M``
projections of a complete, orthogonal-like dictionary), so the fixed-strategy
mean decays exactly to zero after ``M`` iterations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.special as sp

from .prng import numpy_rng

_TAIL = 1e-16


class QuadratureError(RuntimeError):
    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


@dataclass(frozen=True)
class Distribution:
    """``uniform`` on ``[0, scale]``, ``halfnormal`` with ``sigma = scale``
    (|N(0, sigma^2)|, folded), or ``exponential`` with mean ``scale``."""

    kind: str
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "halfnormal", "exponential"):
            raise ValueError(f"unknown distribution {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @classmethod
    def uniform(cls, width: float = 1.0):
        return cls("uniform", width)

    @classmethod
    def halfnormal(cls, sigma: float = 1.0):
        return cls("halfnormal", sigma)

    @classmethod
    def exponential(cls, mean: float = 1.0):
        return cls("exponential", mean)

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, self.scale) if self.kind == "uniform" else (0.0, math.inf)

    def pdf(self, z):
        return np.exp(self.logpdf(z))

    def cdf(self, z):
        return np.exp(self.logcdf(z))

    def logpdf(self, z):
        z = np.asarray(z, dtype=np.float64)
        c = self.scale
        with np.errstate(divide="ignore"):
            if self.kind == "uniform":
                out = np.full(z.shape, -math.log(c))
                return np.where((z >= 0) & (z <= c), out, -np.inf)
            if self.kind == "halfnormal":
                out = 0.5 * math.log(2 / math.pi) - math.log(c) - 0.5 * (z / c) ** 2
            else:
                out = -math.log(c) - z / c
            return np.where(z >= 0, out, -np.inf)

    def logcdf(self, z):
        z = np.asarray(z, dtype=np.float64)
        c = self.scale
        with np.errstate(divide="ignore"):
            if self.kind == "uniform":
                return np.log(np.clip(z / c, 0.0, 1.0))
            if self.kind == "halfnormal":
                # F = erf(z / (c sqrt 2)) = 1 - 2 Phi(-z/c)
                zz = np.maximum(z, 0.0)
                return np.log1p(-2.0 * sp.ndtr(-zz / c))
            return np.log(-np.expm1(-np.maximum(z, 0.0) / c))

    def logsf(self, z):
        z = np.asarray(z, dtype=np.float64)
        c = self.scale
        with np.errstate(divide="ignore"):
            if self.kind == "uniform":
                return np.log1p(-np.clip(z / c, 0.0, 1.0))
            if self.kind == "halfnormal":
                return math.log(2.0) + sp.log_ndtr(-np.maximum(z, 0.0) / c)
            return -np.maximum(z, 0.0) / c

    def ppf(self, p):
        p = np.asarray(p, dtype=np.float64)
        c = self.scale
        if self.kind == "uniform":
            return c * p
        if self.kind == "halfnormal":
            return c * sp.ndtri(0.5 + 0.5 * p)
        return -c * np.log1p(-p)

    def isf(self, q):
        """Inverse survival function, accurate for tiny upper-tail mass ``q``."""
        q = np.asarray(q, dtype=np.float64)
        c = self.scale
        if self.kind == "uniform":
            return c * (1.0 - q)
        if self.kind == "halfnormal":
            return -c * sp.ndtri(0.5 * q)
        return -c * np.log(q)

    def raw_moment(self, m: int) -> float:
        c = self.scale
        if self.kind == "uniform":
            return c ** m / (m + 1)
        if self.kind == "halfnormal":
            return c ** m * 2 ** (m / 2) * math.gamma((m + 1) / 2) / math.sqrt(math.pi)
        return c ** m * math.factorial(m)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "uniform":
            return self.scale * rng.random(size)
        if self.kind == "halfnormal":
            return self.scale * np.abs(rng.standard_normal(size))
        return rng.exponential(self.scale, size)


def _check_rank(i: int, n: int) -> None:
    if not 1 <= i <= n:
        raise ValueError(f"rank {i} outside [1, {n}]")


def order_logpdf(dist: Distribution, i: int, n: int, z):
    _check_rank(i, n)
    z = np.asarray(z, dtype=np.float64)
    logc = sp.gammaln(n + 1) - sp.gammaln(n - i + 1) - sp.gammaln(i)
    with np.errstate(invalid="ignore"):
        lo = (i - 1) * dist.logcdf(z) if i > 1 else 0.0
        hi = (n - i) * dist.logsf(z) if n > i else 0.0
        out = logc + lo + dist.logpdf(z) + hi
    return np.where(np.isnan(out), -np.inf, out)


def order_pdf(dist: Distribution, i: int, n: int, z):
    """Density of the ``i``-th smallest of ``n`` draws, evaluated in log space."""
    return np.exp(order_logpdf(dist, i, n, z))


def _integration_range(dist: Distribution, i: int, n: int) -> tuple[float, float, float]:
    """Interval holding all but ~1e-16 of the mass of Z_{i:n}, plus its median."""
    a, b = i, n - i + 1
    lo = float(dist.ppf(sp.betaincinv(a, b, _TAIL)))
    hi = float(dist.isf(sp.betaincinv(b, a, _TAIL)))
    mid = float(dist.ppf(sp.betaincinv(a, b, 0.5)))
    lo, hi = max(lo, dist.support[0]), min(hi, dist.support[1])
    return lo, hi, mid


def expect_order(dist: Distribution, i: int, n: int, func, *, upper: float | None = None,
                 epsabs: float = 1e-10, epsrel: float = 1e-10) -> float:
    """``E[func(Z_{i:n})]`` by adaptive Gauss-Kronrod quadrature.

    With ``upper`` the integral stops there (no renormalization).
    """
    lo, hi, mid = _integration_range(dist, i, n)
    if upper is not None:
        hi = min(hi, upper)
        if hi <= lo:
            return 0.0

    def integrand(z):
        return func(z) * math.exp(float(order_logpdf(dist, i, n, z)))

    points = [mid] if lo < mid < hi else None
    val, err, info = scipy.integrate.quad(integrand, lo, hi, points=points, epsabs=epsabs,
                                          epsrel=epsrel, limit=400, full_output=True)[:3]
    if err > max(epsabs, epsrel * abs(val)) * 10:
        raise QuadratureError(f"E[g(Z_{i}:{n})] did not converge", err)
    return float(val)


def order_moment(dist: Distribution, i: int, n: int, m: int, method: str = "auto") -> float:
    """``E[Z_{i:n}^m]``; uniform uses the Beta closed form unless ``method='quad'``."""
    _check_rank(i, n)
    if m < 1:
        raise ValueError("moment order must be >= 1")
    if method not in ("auto", "quad", "closed"):
        raise ValueError(method)
    if dist.kind == "uniform" and method != "quad":
        # Z_{i:n} / c ~ Beta(i, n + 1 - i)
        return dist.scale ** m * math.prod((i + j) / (n + 1 + j) for j in range(m))
    if method == "closed":
        raise ValueError("closed form only exists for the uniform model")
    return expect_order(dist, i, n, lambda z: z ** m)


def model_energy(dist: Distribution, M: int) -> float:
    return M * dist.raw_moment(2)


@dataclass
class Prediction:
    values: np.ndarray
    truncated: bool = False  # model broke down and the mean was clipped at 0


def predict_fixed(dist: Distribution, M: int, n_iters: int, f_energy: float | None = None) -> Prediction:
    """``E|R^n f|^2 = |f|^2 - sum_{i<n} E[Z_{M-i:M}^2]`` for ``n = 0..n_iters``."""
    if not 0 <= n_iters <= M:
        raise ValueError("need 0 <= n_iters <= M")
    f_energy = model_energy(dist, M) if f_energy is None else f_energy
    removed = np.cumsum([0.0] + [order_moment(dist, M - i, M, 2) for i in range(n_iters)])
    out = f_energy - removed
    truncated = bool(np.any(out < 0))
    return Prediction(np.maximum(out, 0.0), truncated)


def _max_mass(dist: Distribution, M: int, f_energy: float) -> float:
    """``P(Z_{M:M} <= |f|)``: the redraw model rejects larger maxima."""
    return float(np.exp(M * dist.logcdf(math.sqrt(f_energy))))


def _redraw_expectation(dist, M, f_energy, power):
    """``E[(1 - W)^power]`` with ``W = Z_{M:M}^2/|f|^2`` conditioned on ``W <= 1``."""
    val = expect_order(dist, M, M, lambda z: (1.0 - z * z / f_energy) ** power,
                       upper=math.sqrt(f_energy))
    return val / _max_mass(dist, M, f_energy)


def max_moment(dist: Distribution, M: int, m: int, f_energy: float | None = None) -> float:
    """``E[Z_{M:M}^m]``, conditioned on ``Z_{M:M} <= |f|`` when ``f_energy`` is given."""
    if f_energy is None:
        return order_moment(dist, M, M, m)
    val = expect_order(dist, M, M, lambda z: z ** m, upper=math.sqrt(f_energy))
    return val / _max_mass(dist, M, f_energy)


def predict_redraw(dist: Distribution, M: int, n_iters: int, f_energy: float | None = None) -> Prediction:
    """``|f|^2 * E[(1 - Z_{M:M}^2/|f|^2)^n]``, the integral form of the
    alternating binomial sum of even maximum moments.

    Maxima above ``|f|`` are excluded (the law of ``Z_{M:M}`` is conditioned
    on ``Z_{M:M} <= |f|``), matching the rejection rule of the simulator.  For
    bounded or light-tailed models at the default normalization the excluded
    mass is negligible; without it heavy tails make the expectation explode.
    """
    if n_iters < 0:
        raise ValueError("n_iters must be non-negative")
    f_energy = model_energy(dist, M) if f_energy is None else f_energy
    vals = np.array([f_energy * _redraw_expectation(dist, M, f_energy, n) for n in range(n_iters + 1)])
    truncated = bool(np.any(vals < 0))
    return Prediction(np.maximum(vals, 0.0), truncated)


def predict_redraw_sum(dist: Distribution, M: int, n: int, f_energy: float | None = None) -> float:
    """Binomial-sum form; loses precision to cancellation for large ``n``."""
    f_energy = model_energy(dist, M) if f_energy is None else f_energy
    total = f_energy
    for i in range(1, n + 1):
        total += (-1) ** i * math.comb(n, i) * max_moment(dist, M, 2 * i, f_energy) / f_energy ** (i - 1)
    return total


def predict_redraw_iid(dist: Distribution, M: int, n_iters: int, f_energy: float | None = None) -> np.ndarray:
    """``|f|^2 * E[1 - W]^n``: the mean under independent redraws.

    The closed-form redraw predictor raises the same ``W`` to the ``n``-th
    power, i.e. treats successive maxima as fully correlated; the simulator
    draws them independently.  Both coincide when ``W`` is concentrated
    (uniform model) and drift apart for spread-out maxima.
    """
    f_energy = model_energy(dist, M) if f_energy is None else f_energy
    e1 = _redraw_expectation(dist, M, f_energy, 1)
    return f_energy * e1 ** np.arange(n_iters + 1)


# --------------------------------------------------------------------------
# Monte Carlo


@dataclass
class Simulation:
    mean: np.ndarray
    var: np.ndarray
    mean_stderr: np.ndarray
    var_stderr: np.ndarray
    trials: int
    clamp_count: int = 0


_CHUNK = 5000


def _accumulate(chunks: list[np.ndarray]) -> tuple[np.ndarray, ...]:
    x = np.concatenate(chunks, axis=0)
    T = x.shape[0]
    mean = x.mean(axis=0)
    dev = x - mean
    var = (dev ** 2).sum(axis=0) / max(T - 1, 1)
    m4 = (dev ** 4).mean(axis=0)
    mean_se = np.sqrt(var / T)
    var_se = np.sqrt(np.maximum(m4 - var ** 2, 0.0) / T)
    return mean, var, mean_se, var_se


def simulate_greedy(dist: Distribution, M: int, n_iters: int, strategy: str, trials: int,
                    seed: int = 0, f_energy: float | None = None) -> Simulation:
    """Monte Carlo residual-energy traces for ``n = 0..n_iters``.

    ``fixed``: one set of ``M`` draws; iteration ``n`` removes the square of
    the ``n``-th largest.  ``redraw``: every iteration draws ``M`` fresh
    values scaled by ``|R|/|f|`` and removes the square of the largest.  A
    redraw whose maximum would exceed the residual norm is rejected and drawn
    again; such events are counted in ``clamp_count``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if strategy not in ("fixed", "redraw"):
        raise ValueError(f"unknown strategy {strategy!r}")
    if strategy == "fixed" and n_iters > M:
        raise ValueError("fixed strategy needs n_iters <= M")
    f_energy = model_energy(dist, M) if f_energy is None else f_energy
    f_norm = math.sqrt(f_energy)
    chunks, clamps = [], 0
    for c, start in enumerate(range(0, trials, _CHUNK)):
        T = min(_CHUNK, trials - start)
        rng = numpy_rng(seed, 0 if strategy == "fixed" else 1, c)
        out = np.empty((T, n_iters + 1))
        out[:, 0] = f_energy
        if strategy == "fixed":
            z = dist.sample(rng, (T, M))
            top = -np.sort(-z, axis=1)[:, :n_iters]
            out[:, 1:] = f_energy - np.cumsum(top ** 2, axis=1)
        else:
            ratio = np.ones(T)  # |R|^2 / |f|^2
            for n in range(n_iters):
                zmax = dist.sample(rng, (T, M)).max(axis=1)
                bad = np.flatnonzero(zmax > f_norm)
                while bad.size:
                    clamps += bad.size
                    zmax[bad] = dist.sample(rng, (bad.size, M)).max(axis=1)
                    bad = bad[zmax[bad] > f_norm]
                ratio = ratio * (1.0 - zmax ** 2 / f_energy)
                out[:, n + 1] = f_energy * ratio
        chunks.append(out)
    mean, var, mean_se, var_se = _accumulate(chunks)
    return Simulation(mean, var, mean_se, var_se, trials, clamps)


@dataclass
class VariancePrediction:
    values: np.ndarray
    stderr: np.ndarray  # zero for the closed-form redraw strategy


def predict_variance(dist: Distribution, M: int, n_iters: int, strategy: str,
                     f_energy: float | None = None, trials: int = 100_000,
                     seed: int = 1) -> VariancePrediction:
    """Variance of ``|R^n f|^2`` under either strategy.

    ``redraw`` follows the closed form in the moments of the maximum
    (``|f|^4 (E[(1-W)^{2n}] - E[(1-W)^n]^2)``, ``W = Z_{M:M}^2/|f|^2``);
    ``fixed`` estimates the covariance sum of squared order statistics by
    Monte Carlo and reports its standard error.
    """
    f_energy = model_energy(dist, M) if f_energy is None else f_energy
    if strategy == "redraw":
        vals = [0.0]
        for n in range(1, n_iters + 1):
            e1 = _redraw_expectation(dist, M, f_energy, n)
            e2 = _redraw_expectation(dist, M, f_energy, 2 * n)
            vals.append(f_energy ** 2 * (e2 - e1 * e1))
        vals = np.maximum(np.array(vals), 0.0)
        return VariancePrediction(vals, np.zeros_like(vals))
    if strategy != "fixed":
        raise ValueError(f"unknown strategy {strategy!r}")
    sim = simulate_greedy(dist, M, n_iters, "fixed", trials, seed, f_energy)
    return VariancePrediction(sim.var, sim.var_stderr)


def relative_db(energies, f_energy: float) -> np.ndarray:
    """``10 log10(E / |f|^2)``."""
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(energies) / f_energy)
