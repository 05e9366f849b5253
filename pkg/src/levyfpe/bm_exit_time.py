"""Exact sampling of the Brownian first exit time from (-a, a), start 0.

The exit-time density restricted to {fet >= a^2} is, after the change of
variable xi = pi^2 fet / (8 a^2), dominated by a Gamma(1)-tail times
geometric mixture; restricted to {fet <= a^2} the variable
zeta = a^2 / (2 fet) is dominated by a Gamma(1/2)-tail times geometric
mixture.  Both dominations follow from psi(x y) <= C0 y exp(-x y^2 / 2)
for x, y >= 1, with psi(x) = x exp(-x^2/2) and C0 = 2/sqrt(e).  The two
branches are mixed with weights proportional to A and B below, giving an
exact rejection sampler for the unconditional exit time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .errors import InternalError, ParameterError
from .samplers import sample_geometric, sample_truncated_gamma1, sample_truncated_gamma_half
from .streams import RandomStream

C0 = 2.0 / math.sqrt(math.e)
_PI2_8 = math.pi * math.pi / 8.0
_OUTER_CAP = 1_000_000


def psi(x: float) -> float:
    """psi(x) = x exp(-x^2/2)."""
    return x * math.exp(-0.5 * x * x)


def d_k(k: int, s: float) -> float:
    """d_k(s) = psi((4k+1) sqrt(2s)) - psi((4k+3) sqrt(2s)); positive for
    s >= 1/2 since psi decreases on [1, infinity)."""
    if k < 0:
        raise ParameterError(f"k must be >= 0, got {k}")
    if s <= 0.0:
        raise ParameterError(f"s must be > 0, got {s}")
    r = math.sqrt(2.0 * s)
    return psi((4 * k + 1) * r) - psi((4 * k + 3) * r)


@dataclass(frozen=True)
class ExitTimeConstants:
    """Mixture weights of the two rejection branches.

    A = 4 C0 P{Gamma(1) >= pi^2/8} / (pi (1 - e^{-pi^2/2}))
    B = 2 C0 P{Gamma(1/2) > 1/2} / (1 - e^{-2})
    with the tail probabilities in closed form: exp(-pi^2/8) and erfc(1/sqrt 2).
    """

    C0: float = C0
    A: float = field(default=4.0 * C0 * math.exp(-_PI2_8) / (math.pi * (1.0 - math.exp(-0.5 * math.pi * math.pi))))
    B: float = field(default=2.0 * C0 * float(erfc(1.0 / math.sqrt(2.0))) / (1.0 - math.exp(-2.0)))

    @property
    def branch1_probability(self) -> float:
        return self.A / (self.A + self.B)


def constants() -> ExitTimeConstants:
    return ExitTimeConstants()


@dataclass
class ExitTimeStats:
    """Per-run rejection diagnostics."""

    outer_iterations: int = 0
    branch1_entries: int = 0
    accepted: int = 0


_CONSTS = constants()
_THRESH1 = 1.0 - math.exp(-0.5 * math.pi * math.pi)
_THRESH2 = 1.0 - math.exp(-2.0)


def sample_exit_time(
    stream: RandomStream, a: float, stats: ExitTimeStats | None = None
) -> float:
    """One exact draw of the first exit time of a standard BM from (-a, a)."""
    if a <= 0.0:
        raise ParameterError(f"half-width a must be > 0, got {a}")
    p1 = _CONSTS.branch1_probability
    a2 = a * a
    for _ in range(_OUTER_CAP):
        if stats is not None:
            stats.outer_iterations += 1
        u1 = stream.uniform()
        u2 = stream.uniform()
        u3 = stream.uniform()
        u4 = stream.uniform()
        u5 = stream.uniform()
        if u1 <= p1:
            if stats is not None:
                stats.branch1_entries += 1
            xi = sample_truncated_gamma1(stream, _PI2_8)
            c = math.exp(-4.0 * xi)
            kappa = sample_geometric(stream, c) if c > 0.0 else 0
            if u2 * (1.0 - c) <= _THRESH1 and C0 * u3 * math.sqrt(2.0 * xi) * math.exp(
                -(4 * kappa + 1) * xi
            ) <= d_k(kappa, xi):
                if stats is not None:
                    stats.accepted += 1
                return 8.0 * a2 * xi / (math.pi * math.pi)
        else:
            zeta = sample_truncated_gamma_half(stream, 0.5)
            c = math.exp(-4.0 * zeta)
            kappa = sample_geometric(stream, c) if c > 0.0 else 0
            if u4 * (1.0 - c) <= _THRESH2 and C0 * u5 * math.sqrt(2.0 * zeta) * math.exp(
                -(4 * kappa + 1) * zeta
            ) <= d_k(kappa, zeta):
                if stats is not None:
                    stats.accepted += 1
                return a2 / (2.0 * zeta)
    raise InternalError(f"sample_exit_time: no acceptance in {_OUTER_CAP} iterations")


def sample_exit_times(
    stream: RandomStream, a: float, n: int, stats: ExitTimeStats | None = None
) -> np.ndarray:
    """n exact exit-time draws, generated in vectorized rejection rounds.

    The accepted law is identical to repeated ``sample_exit_time`` calls;
    only the order in which raw variates are consumed differs.
    """
    if a <= 0.0:
        raise ParameterError(f"half-width a must be > 0, got {a}")
    if n < 0:
        raise ParameterError(f"n must be >= 0, got {n}")
    p1 = _CONSTS.branch1_probability
    a2 = a * a
    out = np.empty(n)
    filled = 0
    rounds = 0
    gen = stream._gen
    while filled < n:
        rounds += 1
        if rounds > 1000:
            raise InternalError("sample_exit_times: acceptance stalled")
        m = max(256, int(1.6 * (n - filled)))
        u = gen.random((5, m))
        branch1 = u[0] <= p1
        if stats is not None:
            stats.outer_iterations += m
            stats.branch1_entries += int(branch1.sum())

        # branch 1: xi ~ Gamma(1) | xi >= pi^2/8
        xi = _PI2_8 + gen.standard_exponential(m)
        # branch 2: zeta = z^2/2 with |z| > 1, Marsaglia tail rejection
        zeta = _vector_gamma_half_tail(gen, m)
        s = np.where(branch1, xi, zeta)
        c = np.exp(-4.0 * s)
        ug = np.clip(gen.random(m), 1e-300, None)
        kappa = np.where(c > 0.0, np.floor(np.log(ug) / np.log(np.where(c > 0.0, c, 0.5))), 0.0)
        kappa = kappa.astype(np.int64)

        r = np.sqrt(2.0 * s)
        dk = _psi_vec((4 * kappa + 1) * r) - _psi_vec((4 * kappa + 3) * r)
        cond_u = np.where(branch1, u[1], u[3])
        thresh = np.where(branch1, _THRESH1, _THRESH2)
        cond_v = np.where(branch1, u[2], u[4])
        accept = (cond_u * (1.0 - c) <= thresh) & (
            C0 * cond_v * r * np.exp(-(4 * kappa + 1) * s) <= dk
        )
        vals = np.where(branch1, 8.0 * a2 * s / (math.pi * math.pi), a2 / (2.0 * s))
        got = vals[accept]
        take = min(n - filled, got.size)
        out[filled : filled + take] = got[:take]
        filled += take
        if stats is not None:
            stats.accepted += take
    return out


def _psi_vec(x: np.ndarray) -> np.ndarray:
    return x * np.exp(-0.5 * x * x)


def _vector_gamma_half_tail(gen: np.random.Generator, m: int) -> np.ndarray:
    """Vector of Gamma(1/2) | > 1/2 draws via the normal-tail representation."""
    out = np.empty(m)
    need = np.arange(m)
    while need.size:
        e1 = gen.standard_exponential(need.size)
        e2 = gen.standard_exponential(need.size)
        ok = e1 * e1 < 2.0 * e2
        z = 1.0 + e1[ok]
        out[need[ok]] = 0.5 * z * z
        need = need[~ok]
    return out
