"""Primitive exact samplers.

All routines are pure functions of the supplied ``RandomStream``.  Rejection
loops resolve comparison ties toward rejection (re-loop), never acceptance.
"""

from __future__ import annotations

import math
from typing import Callable

from .errors import InternalError, ParameterError
from .streams import RandomStream

_MAX_DISCRETE_TERMS = 10_000


def sample_normal(stream: RandomStream, mean: float, variance: float) -> float:
    """Exact N(mean, variance) draw; variance 0 returns the mean."""
    if not math.isfinite(variance) or variance < 0.0:
        raise ParameterError(f"variance must be finite and >= 0, got {variance}")
    if variance == 0.0:
        return mean
    return mean + math.sqrt(variance) * stream.standard_normal()


def sample_truncated_gamma1(stream: RandomStream, cut: float) -> float:
    """Gamma(1) conditioned >= cut, i.e. cut + Exp(1) by memorylessness."""
    if cut < 0.0:
        raise ParameterError(f"cut must be >= 0, got {cut}")
    return cut + stream.exponential()


def sample_truncated_gamma_half(stream: RandomStream, cut: float) -> float:
    """Gamma(1/2) conditioned > cut.

    Uses zeta = Z^2/2 with Z a standard normal conditioned |Z| > sqrt(2 cut).
    The normal tail is sampled by Marsaglia's method: propose a shifted
    exponential Z = c + E1/c and accept when E1^2 <= 2 c^2 E2.
    """
    if cut <= 0.0:
        raise ParameterError(f"cut must be > 0, got {cut}")
    c = math.sqrt(2.0 * cut)
    while True:
        e1 = stream.exponential()
        e2 = stream.exponential()
        if e1 * e1 < 2.0 * c * c * e2:
            z = c + e1 / c
            return 0.5 * z * z


def sample_geometric(stream: RandomStream, c: float) -> int:
    """Geometric on {0,1,2,...} with pmf (1-c) c^k, via floor(log U / log c)."""
    if not 0.0 < c < 1.0:
        raise ParameterError(f"c must be in (0,1), got {c}")
    u = stream.uniform()
    return int(math.log(u) / math.log(c))


def sample_arcsine(stream: RandomStream, upper: float) -> float:
    """Beta(1/2,1/2) scaled to (0, upper): upper * sin^2(pi U / 2)."""
    if upper <= 0.0:
        raise ParameterError(f"upper must be > 0, got {upper}")
    s = math.sin(0.5 * math.pi * stream.uniform())
    return upper * s * s


def sample_discrete_certified(
    stream: RandomStream,
    weight: Callable[[int], float],
    ratio_bound: Callable[[int], float],
    tail_start: int = 0,
) -> int:
    """Exact draw from the pmf proportional to ``weight(k)``, k = 0,1,2,...

    ``ratio_bound(k)`` must return a certified bound q_k >= w(k+1)/w(k),
    nonincreasing and < 1 for k >= tail_start, so that for n >= tail_start
    the unseen mass beyond n is at most w(n) q_n / (1 - q_n).

    Sequential inversion: prefix sums are accumulated until the certified
    geometric tail bound pins the normalizing constant tightly enough that
    the uniform variate's quantile index is unambiguous at the float level.
    """
    u = stream.uniform()
    prefix: list[float] = []
    total = 0.0
    k = 0
    while k < _MAX_DISCRETE_TERMS:
        w = weight(k)
        if w < 0.0:
            raise InternalError(f"negative weight w({k}) = {w}")
        if k > tail_start:
            q_prev = ratio_bound(k - 1)
            if w > weight(k - 1) * q_prev * (1.0 + 1e-12):
                raise InternalError(
                    f"certified ratio bound violated at k={k}: "
                    f"w(k)={w}, w(k-1)*q={weight(k - 1) * q_prev}"
                )
        total += w
        prefix.append(total)
        if k >= tail_start:
            q = ratio_bound(k)
            if 0.0 <= q < 1.0:
                tail = w * q / (1.0 - q)
                if tail <= 1e-15 * total:
                    target = u * (total + tail)
                    for j, s in enumerate(prefix):
                        if s >= target:
                            return j
                    return k
        k += 1
    raise InternalError(
        f"sample_discrete_certified used {_MAX_DISCRETE_TERMS} terms without "
        f"certifying the tail (last weight {weight(_MAX_DISCRETE_TERMS - 1)})"
    )


def certified_pmf_table(
    weight: Callable[[int], float],
    ratio_bound: Callable[[int], float],
    tail_start: int = 0,
) -> list[float]:
    """Weights w(0..k_max) where the certified tail beyond k_max is below
    1e-15 of the total mass.  Shared by the vectorized samplers."""
    weights: list[float] = []
    total = 0.0
    k = 0
    while k < _MAX_DISCRETE_TERMS:
        w = weight(k)
        weights.append(w)
        total += w
        if k >= tail_start:
            q = ratio_bound(k)
            if 0.0 <= q < 1.0 and w * q / (1.0 - q) <= 1e-15 * total:
                return weights
        k += 1
    raise InternalError("certified_pmf_table: tail not certified within term cap")
