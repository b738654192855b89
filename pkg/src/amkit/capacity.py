"""Storage capacity: closed-form noise statistics and Monte Carlo harness.

Capacity experiments use a spin network with ``K`` random +-1 memories in
``D`` neurons. Memory 0 is stored successfully when one synchronous
evaluation of the update rule (self term excluded) leaves every spin in
place. The separation function is selected by ``n``: an integer ``n >= 2``
means ``F(z) = z**n / n`` and the string ``"exp"`` means ``F = exp``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from . import _backend
from .core import make_rng, parallel_map
from .errors import InsufficientDataError, ValidationError

Z_95 = 1.959963984540054


def double_factorial(k: int) -> int:
    """``k!!`` with ``(-1)!! = 0!! = 1``."""
    if k < -1:
        raise ValidationError(f"double factorial undefined for {k}")
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def normal_upper_tail(y: float) -> float:
    return 0.5 * math.erfc(y / math.sqrt(2.0))


@dataclass(frozen=True)
class CapacityTheory:
    n: int
    K: int
    D: int
    alpha: float = 2.576

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValidationError("closed forms need an integer n >= 2")
        if self.K < 1 or self.D < 1:
            raise ValidationError("K and D must be >= 1")
        if not self.alpha > 0:
            raise ValidationError("alpha must be positive")


class TheoryStats(NamedTuple):
    variance: float
    p_error: float
    k_max_bound: float


def theory_stats(t: CapacityTheory) -> TheoryStats:
    """Noise variance, single-spin error probability and the capacity bound.

    variance ``(2n-3)!! K D**(n-1)``; error ``g(f(D-1) / sqrt(variance))``
    with ``f(z) = z**(n-1)`` and ``g`` the normal upper tail; bound
    ``D**(n-1) / (alpha**2 (2n-3)!!)``.
    """
    c = double_factorial(2 * t.n - 3)
    variance = float(c * t.K * float(t.D) ** (t.n - 1))
    signal = float(t.D - 1) ** (t.n - 1)
    p_error = normal_upper_tail(signal / math.sqrt(variance))
    k_max = float(t.D) ** (t.n - 1) / (t.alpha ** 2 * c)
    return TheoryStats(variance, p_error, k_max)


# moments of a sum of Rademacher variables ------------------------------------

def exact_rademacher_moment(N: int, order: int) -> float:
    """Exact ``E[X**order]`` for ``X`` a sum of ``N`` independent +-1 spins."""
    if order % 2:
        return 0.0
    total = Fraction(0)
    for k in range(N + 1):
        total += math.comb(N, k) * Fraction(2 * k - N) ** order
    return float(total / 2 ** N)


def _rademacher_sums(N: int, samples: int, seed: int) -> np.ndarray:
    rng = make_rng(seed)
    return 2.0 * rng.binomial(N, 0.5, size=samples).astype(np.float64) - N


class MomentCheck(NamedTuple):
    empirical: float
    theory: float
    exact: float


def moment_check(D: int, p: int, samples: int, seed: int) -> MomentCheck:
    """Empirical ``E[X**(2p)]`` for ``X = sum_{j=2..D} xi_j`` against ``(2p-1)!! D**p``.

    The leading-order theory uses ``D`` where the exact finite value (also
    returned) uses ``D - 1`` summands.
    """
    if p < 1:
        raise ValidationError("p must be >= 1")
    X = _rademacher_sums(D - 1, samples, seed)
    return MomentCheck(float(np.mean(X ** (2 * p))), float(double_factorial(2 * p - 1) * float(D) ** p),
                       exact_rademacher_moment(D - 1, 2 * p))


def empirical_moment(D: int, order: int, samples: int, seed: int) -> tuple[float, float]:
    """Sample moment of any order and its standard error."""
    vals = _rademacher_sums(D - 1, samples, seed) ** order
    return float(np.mean(vals)), float(np.std(vals) / math.sqrt(samples))


# Monte Carlo ---------------------------------------------------------------

def _code(n) -> tuple[int, int]:
    if n == "exp":
        return _backend.EXP, 0
    if int(n) != n or n < 2:
        raise ValidationError(f"n must be an integer >= 2 or 'exp', got {n!r}")
    return _backend.POWER, int(n)


def _separation_deriv(n):
    if n == "exp":
        return np.exp
    return lambda z: np.asarray(z, dtype=np.float64) ** (n - 1)


def random_spins(rng: np.random.Generator, D: int, K: int) -> np.ndarray:
    return 2.0 * rng.integers(0, 2, size=(D, K), dtype=np.int8).astype(np.float64) - 1.0


class FlipRateEstimate(NamedTuple):
    rate: float
    trials: int
    confidence_halfwidth: float
    pattern_error_rate: float
    flipped: int
    spins: int


def empirical_flip_rate(n, D: int, K: int, trials: int, seed: int, threads: int = 1,
                        backend: str | None = None) -> FlipRateEstimate:
    """Fraction of memory-0 spins flipped by one synchronous update.

    Trial ``i`` draws its patterns from ``make_rng(seed, i)`` so the result
    does not depend on ``threads``. Both the per-spin rate and the fraction
    of trials with at least one flip are reported.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    code, power = _code(n)

    def one(i):
        xi = random_spins(make_rng(seed, i), D, K)
        return _backend.unstable_spins(xi, code, power, backend)

    flips = np.asarray(parallel_map(one, range(trials), threads), dtype=np.int64)
    spins = trials * D
    rate = float(flips.sum()) / spins
    half = Z_95 * math.sqrt(max(rate * (1.0 - rate), 0.0) / spins)
    return FlipRateEstimate(rate, trials, half, float(np.mean(flips > 0)), int(flips.sum()), spins)


class KmaxSearch(NamedTuple):
    k: int
    estimate: FlipRateEstimate
    evaluations: dict


def kmax_search(n, D: int, target_rate: float = 0.01, trials: int = 100, seed: int = 0,
                threads: int = 1, k_cap: int = 1 << 24, backend: str | None = None) -> KmaxSearch:
    """Largest ``K`` whose flip rate stays at or below ``target_rate``.

    Doubling from ``K = 1`` brackets the threshold, then 8 bisection rounds
    narrow it. Each ``K`` uses its own seed derived from ``(seed, K)``.
    """
    if not 0.0 < target_rate < 1.0:
        raise ValidationError("target_rate must lie in (0, 1)")
    evals: dict[int, FlipRateEstimate] = {}

    def rate(K):
        if K not in evals:
            sub = int(make_rng(seed, K).integers(0, 2**63))
            evals[K] = empirical_flip_rate(n, D, K, trials, sub, threads, backend)
        return evals[K].rate

    lo = 1
    if rate(1) > target_rate:
        return KmaxSearch(0, evals[1], evals)
    hi = 2
    while rate(hi) <= target_rate:
        lo = hi
        if hi >= k_cap:
            return KmaxSearch(lo, evals[lo], evals)
        hi *= 2
    for _ in range(8):
        mid = (lo + hi) // 2
        if mid == lo:
            break
        if rate(mid) <= target_rate:
            lo = mid
        else:
            hi = mid
    return KmaxSearch(lo, evals[lo], evals)


def estimate_kmax(n, D: int, target_rate: float = 0.01, trials: int = 100, seed: int = 0,
                  threads: int = 1) -> int:
    return kmax_search(n, D, target_rate, trials, seed, threads).k


class ScalingFit(NamedTuple):
    slope: float
    intercept: float


def scaling_fit(points: Sequence[tuple[float, float]]) -> ScalingFit:
    """Least-squares line through ``(log D, log K)``."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise InsufficientDataError("scaling fit needs at least 3 (D, K) points")
    if np.any(pts <= 0):
        raise ValidationError("scaling fit needs positive D and K")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    return ScalingFit(float(slope), float(intercept))


# direct sampling of the noise term ----------------------------------------

def noise_samples(n, D: int, K: int, samples: int, seed: int, chunk: int = 1024) -> np.ndarray:
    """Crosstalk on spin 0 of memory 0 from the other ``K - 1`` memories.

    Each sample draws a fresh pattern set and returns
    ``sum_{mu >= 1} xi[0, mu] f(sum_{j >= 1} xi[j, mu] xi[j, 0])``.
    """
    f = _separation_deriv(n)
    out = np.empty(samples)
    rng = make_rng(seed)
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        xi = 2.0 * rng.integers(0, 2, size=(b, D, K), dtype=np.int8).astype(np.float64) - 1.0
        target = xi[:, :, 0]
        others = xi[:, :, 1:]
        m = np.einsum("bj,bjk->bk", target[:, 1:], others[:, 1:, :])
        out[done:done + b] = np.sum(others[:, 0, :] * f(m), axis=1)
        done += b
    return out


class NoiseVariance(NamedTuple):
    empirical: float
    theory: float
    exact: float


def noise_variance_check(n: int, D: int, K: int, samples: int, seed: int) -> NoiseVariance:
    """Sample variance of the crosstalk against ``(2n-3)!! K D**(n-1)``.

    ``exact`` is the finite-size value ``(K-1) E[X**(2n-2)]`` with ``X`` a sum
    of ``D - 1`` spins.
    """
    x = noise_samples(n, D, K, samples, seed)
    theory = theory_stats(CapacityTheory(n, K, D)).variance
    exact = (K - 1) * exact_rademacher_moment(D - 1, 2 * n - 2)
    return NoiseVariance(float(np.var(x)), theory, exact)
