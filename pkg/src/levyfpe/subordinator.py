"""First-passage triplet sampling for the driving subordinators.

Two subordinators are supported exactly:

* the index-1/2 stable subordinator (Laplace exponent sigma sqrt(2 lambda)),
  whose marginal, undershoot, passage-time and overshoot laws are all in
  closed form through the Brownian hitting-time representation
  S_u ~ (sigma u)^2 / Z^2;
* the deterministic drift subordinator S_t = delta2 * t, which always
  creeps across a level.

A first passage of level h is reported as the triplet
(t, s_minus, s_plus) = (theta, S_{theta-}, S_theta), optionally truncated
at a time horizon, in which case t equals the horizon and
s_minus = s_plus = S_horizon conditioned to lie below h.

For the driftless stable-1/2 subordinator the crossing is a.s. by a jump
and the triplet factorizes (potential density u(s) ~ s^{-1/2} against the
Levy tail of the jump straddling h):

  undershoot   s_minus = h * Beta(1/2, 1/2)          (arcsine law),
  passage time theta   = sqrt(s_minus)/sigma * sqrt(2 E), E ~ Exp(1)
                                                      (Rayleigh law),
  overshoot    s_plus  = s_minus + (h - s_minus)/U^2  (Pareto-1/2 tail).

These laws are re-derived in the test suite against a discretized-path
oracle with exact stable increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from scipy.special import erfc

from .errors import ParameterError
from .samplers import sample_arcsine
from .streams import RandomStream

_MAX_EXPECTED_REJECTIONS = 1e6


class CrossingKind(str, Enum):
    JUMP = "jump"
    CREEP = "creep"
    HORIZON = "horizon"


@dataclass(frozen=True)
class FirstPassageTriplet:
    """(t, s_minus, s_plus) for a level/horizon query.

    Exactly one of: jump crossing (s_minus <= h <= s_plus, s_minus < s_plus);
    creep (s_minus = s_plus = h); horizon (t = horizon, s_minus = s_plus <= h).
    """

    t: float
    s_minus: float
    s_plus: float
    kind: CrossingKind


@dataclass(frozen=True)
class StableHalfParams:
    """Index-1/2 stable subordinator with Laplace exponent sigma sqrt(2 lambda).

    Marginal density p_u(y) = sigma u y^{-3/2} exp(-sigma^2 u^2/(2y)) / sqrt(2 pi);
    Levy density sigma y^{-3/2} / sqrt(2 pi).
    """

    sigma: float

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ParameterError(f"sigma must be > 0, got {self.sigma}")

    @classmethod
    def from_levy_coefficient(cls, c: float) -> "StableHalfParams":
        return cls(sigma=levy_to_scale(c))


@dataclass(frozen=True)
class DriftParams:
    """Deterministic subordinator S_t = delta2 * t (pure drift, creeps)."""

    delta2: float

    def __post_init__(self):
        if self.delta2 <= 0.0:
            raise ParameterError(f"delta2 must be > 0, got {self.delta2}")


def levy_to_scale(c: float) -> float:
    """Scale sigma of the stable-1/2 subordinator whose subordinated Brownian
    motion has Levy density c |x|^{-2}.

    Matching c y^{-3/2} / d_{1/2} with d_{1/2} = Gamma(1) 2^{1/2}/sqrt(pi)
    against sigma y^{-3/2}/sqrt(2 pi) gives sigma = c pi.
    """
    if c <= 0.0:
        raise ParameterError(f"Levy coefficient must be > 0, got {c}")
    return c * math.pi


def sample_marginal(stream: RandomStream, params: StableHalfParams, u: float) -> float:
    """Exact draw of S_u via the hitting-time representation (sigma u)^2/Z^2."""
    if u <= 0.0:
        raise ParameterError(f"time u must be > 0, got {u}")
    z = stream.standard_normal()
    while z == 0.0:
        z = stream.standard_normal()
    su = params.sigma * u
    return su * su / (z * z)


def marginal_cdf_below(params: StableHalfParams, u: float, h: float) -> float:
    """P{S_u <= h} = P{|Z| >= sigma u / sqrt(h)} = erfc(sigma u / sqrt(2 h))."""
    if u <= 0.0 or h <= 0.0:
        raise ParameterError(f"need u > 0 and h > 0, got u={u}, h={h}")
    return float(erfc(params.sigma * u / math.sqrt(2.0 * h)))


def sample_first_passage(
    stream: RandomStream, params: StableHalfParams, h: float
) -> FirstPassageTriplet:
    """Exact triplet (theta, S_{theta-}, S_theta) of the first passage of S
    across level h > 0 (driftless stable-1/2: always a jump crossing)."""
    if h <= 0.0:
        raise ParameterError(f"level h must be > 0, got {h}")
    s_minus = sample_arcsine(stream, h)
    theta = math.sqrt(s_minus) / params.sigma * math.sqrt(2.0 * stream.exponential())
    u = stream.uniform()
    s_plus = s_minus + (h - s_minus) / (u * u)
    return FirstPassageTriplet(theta, s_minus, s_plus, CrossingKind.JUMP)


def sample_first_passage_with_horizon(
    stream: RandomStream, params: StableHalfParams, h: float, horizon: float
) -> FirstPassageTriplet:
    """Exact draw of (min(theta, horizon), S at its left limit, S at it).

    Draw the unconditional triplet; if it crosses within the horizon return
    it, otherwise return (horizon, s, s) with s ~ S_horizon conditioned
    <= h, valid because theta > u iff S_u <= h for a nondecreasing S.
    """
    if horizon <= 0.0:
        raise ParameterError(f"horizon must be > 0, got {horizon}")
    trip = sample_first_passage(stream, params, h)
    if not math.isfinite(horizon) or trip.t <= horizon:
        return trip
    p_below = marginal_cdf_below(params, horizon, h)
    if p_below <= 0.0 or 1.0 / p_below > _MAX_EXPECTED_REJECTIONS:
        raise ParameterError(
            f"P(S_horizon <= h) = {p_below:.3g}: conditional marginal sampling "
            f"infeasible; rescale (h={h}, horizon={horizon}, sigma={params.sigma})"
        )
    while True:
        s = sample_marginal(stream, params, horizon)
        if s <= h:
            return FirstPassageTriplet(horizon, s, s, CrossingKind.HORIZON)


def drift_subordinator_first_passage(
    stream: RandomStream, delta2: float, h: float, horizon: float
) -> FirstPassageTriplet:
    """First passage of the drift subordinator S_t = delta2 t across h,
    truncated at the horizon.  Crossing is deterministic and by creeping."""
    del stream  # deterministic; kept for interface uniformity
    if delta2 <= 0.0:
        raise ParameterError(f"delta2 must be > 0, got {delta2}")
    if h <= 0.0 or horizon <= 0.0:
        raise ParameterError(f"need h > 0 and horizon > 0, got h={h}, horizon={horizon}")
    theta = h / delta2
    if theta <= horizon:
        return FirstPassageTriplet(theta, h, h, CrossingKind.CREEP)
    s = delta2 * horizon
    return FirstPassageTriplet(horizon, s, s, CrossingKind.HORIZON)


# ---------------------------------------------------------------------------
# interfaces reserved for subordinators whose first-passage machinery is not
# implemented here
# ---------------------------------------------------------------------------

class StableSubordinator:
    """General index-alpha/2 stable subordinator interface (alpha in [1, 2)).

    Only alpha = 1 (index 1/2) is implemented; other indices require the
    general stable first-passage machinery and are reserved.
    """

    def __init__(self, alpha: float, c: float):
        if not 1.0 <= alpha < 2.0:
            raise ParameterError(f"alpha must be in [1, 2), got {alpha}")
        if alpha != 1.0:
            raise NotImplementedError(
                "first-passage sampling for stable index alpha/2 with alpha != 1 "
                "is not implemented; only the alpha = 1 (index-1/2) case is"
            )
        self.alpha = alpha
        self.params = StableHalfParams.from_levy_coefficient(c)

    def sample_first_passage(self, stream: RandomStream, h: float) -> FirstPassageTriplet:
        return sample_first_passage(stream, self.params, h)

    def sample_first_passage_with_horizon(
        self, stream: RandomStream, h: float, horizon: float
    ) -> FirstPassageTriplet:
        return sample_first_passage_with_horizon(stream, self.params, h, horizon)


class GammaSubordinator:
    """Interface stub for the Gamma subordinator with drift (creep case with
    jumps).  First-passage sampling is not implemented here."""

    def __init__(self, c: float, beta: float, delta2: float = 0.0):
        raise NotImplementedError(
            "Gamma-subordinator first-passage sampling is not implemented"
        )
