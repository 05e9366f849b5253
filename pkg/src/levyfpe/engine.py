"""Exact sampling of the first passage event of the embedded Levy process.

The target process X is symmetric with Levy density
lambda(x) = lambda0(x) 1{|x| < r}, where lambda0 is the Levy density of
Z = B_S, a standard Brownian motion time-changed by an independent
subordinator S.  X is recovered from Z by deleting the jumps of size >= r.

One sampling iteration, from state (T, W) with W = X_T inside (b, c):

  1. a = min(r/2, W - b, c - W), so every jump of Z before the Brownian
     motion leaves (W - a, W + a) has size < r and belongs to X;
  2. h ~ first exit time of the Brownian motion from the centered interval,
     y ~ uniform on {-a, +a} (the exit side);
  3. (t, s-, s+) ~ first passage triplet of S across level h, truncated at
     the remaining horizon;
  4. the Brownian position x at the pre-passage time s- is drawn
     conditional on the exit data (h, y);
  5. if S jumped across (s- < s+), the Brownian increment over (s-, s+]
     is u ~ N(0, s+ - s-); the Z-jump d = y - x + u belongs to X only if
     |d| <= r.  If S crept (s- = s+ = h), the position is exactly y and
     there is no jump.  If the horizon bound, there is no jump either.
  6. T += t, W += x + D with D the retained jump (0 if none).

The loop stops when T reaches the horizon or W leaves (b, c); the output
(T, W - D, W) is then an exact draw of (exit time, pre-exit value, value).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .bm_exit_time import sample_exit_time
from .bm_pre_exit import sample_pre_exit_location
from .errors import InternalError, ParameterError
from .samplers import sample_normal
from .streams import RandomStream
from .subordinator import (
    CrossingKind,
    DriftParams,
    FirstPassageTriplet,
    StableHalfParams,
    drift_subordinator_first_passage,
    sample_first_passage,
    sample_first_passage_with_horizon,
)

ITERATION_CAP = 100_000


@dataclass(frozen=True)
class ProcessSpec:
    """Symmetric Levy process: subordinator choice plus truncation radius r.

    The implied Levy density is the subordinated-Brownian one cut at |x| < r.
    Neither supported subordinator is compound Poisson, so first exit through
    a boundary point is well defined on the open interval.
    """

    subordinator: StableHalfParams | DriftParams
    r: float = math.inf

    def __post_init__(self):
        if not self.r > 0.0:
            raise ParameterError(f"truncation radius r must be > 0, got {self.r}")

    @classmethod
    def stable_half(cls, c: float, r: float = math.inf) -> "ProcessSpec":
        return cls(StableHalfParams.from_levy_coefficient(c), r)

    @classmethod
    def drift(cls, delta2: float, r: float = math.inf) -> "ProcessSpec":
        return cls(DriftParams(delta2), r)


@dataclass(frozen=True)
class ExitProblem:
    """Exit interval (b, c) with optional finite horizon T0."""

    b: float
    c: float
    T0: float = math.inf

    def __post_init__(self):
        if not (self.b < 0.0 < self.c):
            raise ParameterError(f"need b < 0 < c, got b={self.b}, c={self.c}")
        if not self.T0 > 0.0:
            raise ParameterError(f"horizon T0 must be > 0, got {self.T0}")

    def validate_against(self, spec: ProcessSpec) -> None:
        if math.isinf(-self.b) and math.isinf(self.c):
            if math.isinf(spec.r) or math.isinf(self.T0):
                raise ParameterError(
                    "with b = -inf and c = +inf both r and T0 must be finite"
                )


@dataclass(frozen=True)
class PassageEvent:
    """Exact draw of (exit time, pre-exit value, exit value) plus diagnostics."""

    time: float
    pre_value: float
    value: float
    stopped_by: str  # "exit" | "horizon"
    side: str  # "top" | "bottom" | "none"
    iterations: int


@dataclass
class EngineState:
    """Running state of the sampling loop (exposed for step-level tests)."""

    T: float = 0.0
    W: float = 0.0
    D: float = 0.0
    crossing: CrossingKind | None = None
    discarded_jump: float | None = None
    stopped_by: str | None = None
    last_side: float = 0.0
    iterations: int = 0
    horizon_hit: bool = field(default=False)


def _sample_triplet(
    spec: ProcessSpec, stream: RandomStream, h: float, remaining: float
) -> FirstPassageTriplet:
    if isinstance(spec.subordinator, DriftParams):
        return drift_subordinator_first_passage(stream, spec.subordinator.delta2, h, remaining)
    if math.isinf(remaining):
        return sample_first_passage(stream, spec.subordinator, h)
    return sample_first_passage_with_horizon(stream, spec.subordinator, h, remaining)


def step(state: EngineState, spec: ProcessSpec, problem: ExitProblem, stream: RandomStream) -> EngineState:
    """One sampling iteration; mutates and returns ``state``."""
    if not problem.b < state.W < problem.c:
        raise ParameterError(f"W={state.W} not inside ({problem.b}, {problem.c})")
    if not state.T < problem.T0:
        raise ParameterError(f"T={state.T} not before the horizon {problem.T0}")

    a = min(spec.r / 2.0, state.W - problem.b, problem.c - state.W)
    h = sample_exit_time(stream, a)
    y = a if stream.uniform() < 0.5 else -a
    trip = _sample_triplet(spec, stream, h, problem.T0 - state.T)

    state.discarded_jump = None
    if trip.kind is CrossingKind.JUMP:
        x = sample_pre_exit_location(
            stream, a, T=trip.s_minus, t=h - trip.s_minus, side="+" if y > 0 else "-"
        )
        # the Brownian path is pinned at (h, y); the jump of Z across the
        # passage decomposes as (y - x) over the conditioned stretch
        # [s-, h] plus a free increment over (h, s+], so u ~ N(0, s+ - h)
        u = sample_normal(stream, 0.0, trip.s_plus - h)
        d = y - x + u
        if abs(d) <= spec.r:
            D = d
        else:
            D = 0.0
            state.discarded_jump = d
    elif trip.kind is CrossingKind.CREEP:
        x = y
        D = 0.0
    else:  # horizon: interior position at Brownian time s- = S_{T0 - T} < h
        x = sample_pre_exit_location(
            stream, a, T=trip.s_minus, t=h - trip.s_minus, side="+" if y > 0 else "-"
        )
        D = 0.0

    if trip.kind is CrossingKind.HORIZON:
        state.T = problem.T0
        state.horizon_hit = True
    else:
        state.T += trip.t
    state.W += x + D
    state.D = D
    state.crossing = trip.kind
    state.last_side = y
    state.iterations += 1
    return state


def sample_passage_event(
    spec: ProcessSpec, problem: ExitProblem, stream: RandomStream
) -> PassageEvent:
    """Run the iteration until exit or horizon; exact by construction."""
    problem.validate_against(spec)
    state = EngineState()
    while True:
        step(state, spec, problem, stream)
        if not problem.b < state.W < problem.c:
            stopped = "exit"
            break
        if state.horizon_hit or state.T >= problem.T0:
            stopped = "horizon"
            state.T = problem.T0
            break
        if state.iterations >= ITERATION_CAP:
            raise InternalError(
                f"no exit after {ITERATION_CAP} iterations "
                f"(T={state.T}, W={state.W}, spec={spec}, problem={problem})"
            )
    side = "none"
    if stopped == "exit":
        side = "top" if state.W >= problem.c else "bottom"
    event = PassageEvent(
        time=state.T,
        pre_value=state.W - state.D,
        value=state.W,
        stopped_by=stopped,
        side=side,
        iterations=state.iterations,
    )
    _check_event(event, spec, problem)
    return event


def _check_event(event: PassageEvent, spec: ProcessSpec, problem: ExitProblem) -> None:
    ok = (
        problem.b <= event.pre_value <= problem.c
        and event.time <= problem.T0
        and abs(event.value - event.pre_value) <= spec.r
    )
    if event.stopped_by == "horizon":
        ok = ok and event.time == problem.T0 and problem.b < event.value < problem.c
    else:
        ok = ok and not problem.b < event.value < problem.c
    if not ok:
        raise InternalError(f"event contract violated: {event}")
