"""Brownian first-exit densities with certified truncation error.

For a standard Brownian motion started at 0 (or at x inside (-a, a)), this
module evaluates

* ``hitting_density``       -- density of the first hitting time of a level,
* ``exit_time_density``     -- density f_a(t, x) of the first exit time from
                               (-a, a) started at x,
* ``exit_time_survival``    -- P{exit time > T} started at 0,
* ``exit_side_density``     -- f_a^+(t, x), the joint density of exiting at
                               time t through the top boundary,
* ``pre_exit_density``      -- q_a(T, x), the sub-probability density of
                               being at x at time T before exiting,
* ``boundary_derivatives``  -- spatial derivatives of f_a^+ and q_a at +-a,
* ``envelope_constant_cf``/``envelope_constant_cq`` -- rejection-envelope
                               constants dominating partial sums of the
                               hitting-form series.

Each quantity with a series representation exists in two forms: a
hitting-time (image/reflection) series that converges fast for small time,
and a Dirichlet eigenfunction series that converges fast for large time
(classical formulas; see Borodin & Salminen, "Handbook of Brownian Motion").
Evaluations return a ``SeriesValue`` whose ``error_bound`` is a rigorous
bound on the truncation error: the first omitted term for alternating
series with verified decrease, or a geometric majorant of the omitted tail
otherwise, plus a small accumulation-roundoff cushion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import erfc

from .errors import ParameterError, TruncationError

TERM_CAP = 10_000
# hitting/image form for time <= SWITCH_RATIO * a^2, eigenseries above
SWITCH_RATIO = 1.0

_EPS = 2.2e-16


@dataclass(frozen=True)
class SeriesValue:
    """A series evaluation with a certified truncation-error bound."""

    value: float
    error_bound: float
    terms_used: int

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class BoundaryDerivatives:
    """d/dx of f_a^+ at x -> a-, at x -> -a+, and of q_a at x -> a-."""

    exit_top_at_top: SeriesValue
    exit_top_at_bottom: SeriesValue
    pre_exit_at_top: SeriesValue


def norm_pdf(y: float, var: float) -> float:
    """N(0, var) density at y."""
    return math.exp(-y * y / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


def hitting_pdf(y: float, t: float) -> float:
    """Density at time t of the first hitting time of level y != 0:
    |y| exp(-y^2/(2t)) / (sqrt(2 pi) t^(3/2))."""
    y = abs(y)
    return y * math.exp(-y * y / (2.0 * t)) / (math.sqrt(2.0 * math.pi) * t ** 1.5)


def hitting_density(a: float, t: float) -> float:
    """Density of the first hitting time of level a (a != 0) at time t > 0."""
    if a == 0.0:
        raise ParameterError("level a must be nonzero")
    if t <= 0.0:
        raise ParameterError(f"t must be > 0, got {t}")
    return hitting_pdf(a, t)


def _check_geometry(a: float, t: float, x: float, open_interval: bool = True) -> None:
    if a <= 0.0:
        raise ParameterError(f"half-width a must be > 0, got {a}")
    if t <= 0.0:
        raise ParameterError(f"time must be > 0, got {t}")
    if open_interval:
        if not -a < x < a:
            raise ParameterError(f"x must be in (-{a}, {a}), got {x}")
    else:
        if not -a <= x <= a:
            raise ParameterError(f"x must be in [-{a}, {a}], got {x}")


def _truncation_failure(name: str, tol: float, **params: float) -> TruncationError:
    detail = ", ".join(f"{k}={v!r}" for k, v in params.items())
    return TruncationError(
        f"{name}: tolerance {tol} not certified within {TERM_CAP} terms ({detail})"
    )


def _resolve_form(form: str, time: float, a: float) -> str:
    if form == "auto":
        return "hitting" if time <= SWITCH_RATIO * a * a else "eigen"
    if form not in ("hitting", "eigen"):
        raise ParameterError(f"unknown series form {form!r}")
    return form


def exit_time_density(
    a: float, t: float, x: float, tol: float = 1e-10, form: str = "auto"
) -> SeriesValue:
    """f_a(t, x): density of the first exit time from (-a, a) started at x."""
    _check_geometry(a, t, x)
    form = _resolve_form(form, t, a)
    if form == "hitting":
        return _exit_time_density_hitting(a, t, x, tol)
    return _exit_time_density_eigen(a, t, x, tol)


def _exit_time_density_hitting(a: float, t: float, x: float, tol: float) -> SeriesValue:
    sqrt_t = math.sqrt(t)
    total = 0.0
    abs_sum = 0.0
    prev_mag = math.inf
    for k in range(TERM_CAP):
        mag = hitting_pdf(2 * k * a + a - x, t) + hitting_pdf(2 * k * a + a + x, t)
        # alternating bound: stop once the first omitted term is certified to
        # start a decreasing tail (both hitting arguments past the density
        # mode sqrt(t)) and is <= tol
        if mag <= tol and 2 * k * a + a - abs(x) >= sqrt_t and mag <= prev_mag:
            err = mag + (k + 1) * _EPS * abs_sum
            return SeriesValue(total, err, k)
        total += mag if k % 2 == 0 else -mag
        abs_sum += mag
        prev_mag = mag
    raise _truncation_failure("exit_time_density[hitting]", tol, a=a, t=t, x=x)


def _exit_time_density_eigen(a: float, t: float, x: float, tol: float) -> SeriesValue:
    pref = math.pi / (2.0 * a * a)
    decay = math.pi * math.pi * t / (8.0 * a * a)
    total = 0.0
    abs_sum = 0.0
    for k in range(TERM_CAP):
        n = 2 * k + 1
        mag = pref * n * math.exp(-n * n * decay)
        # geometric bound on the absolutely-majorized tail (|cos| <= 1);
        # the term ratio (n+2)/n * exp(-8(k+1) decay) decreases in k
        ratio = (n + 2) / n * math.exp(-8.0 * (k + 1) * decay)
        if ratio < 1.0 and mag / (1.0 - ratio) <= tol:
            err = mag / (1.0 - ratio) + (k + 1) * _EPS * abs_sum
            return SeriesValue(total, err, k)
        term = mag * math.cos(n * math.pi * x / (2.0 * a))
        total += term if k % 2 == 0 else -term
        abs_sum += abs(term)
    raise _truncation_failure("exit_time_density[eigen]", tol, a=a, t=t, x=x)


def exit_time_survival(
    a: float, T: float, tol: float = 1e-10, form: str = "auto"
) -> SeriesValue:
    """P{first exit time from (-a, a) > T} for a start at 0."""
    if a <= 0.0:
        raise ParameterError(f"half-width a must be > 0, got {a}")
    if T <= 0.0:
        raise ParameterError(f"T must be > 0, got {T}")
    form = _resolve_form(form, T, a)
    if form == "hitting":
        # term-wise time integral of the hitting-form density at x = 0
        cdf = 0.0
        abs_sum = 0.0
        for k in range(TERM_CAP):
            mag = 2.0 * float(erfc((2 * k + 1) * a / math.sqrt(2.0 * T)))
            if mag <= tol:
                err = mag + (k + 1) * _EPS * (abs_sum + 1.0)
                return SeriesValue(1.0 - cdf, err, k)
            cdf += mag if k % 2 == 0 else -mag
            abs_sum += mag
        raise _truncation_failure("exit_time_survival[hitting]", tol, a=a, T=T)
    decay = math.pi * math.pi * T / (8.0 * a * a)
    total = 0.0
    abs_sum = 0.0
    for k in range(TERM_CAP):
        n = 2 * k + 1
        mag = 4.0 / (n * math.pi) * math.exp(-n * n * decay)
        if mag <= tol:
            err = mag + (k + 1) * _EPS * (abs_sum + 1.0)
            return SeriesValue(total, err, k)
        total += mag if k % 2 == 0 else -mag
        abs_sum += mag
    raise _truncation_failure("exit_time_survival[eigen]", tol, a=a, T=T)


def exit_side_density(
    a: float, t: float, x: float, side: str = "+", tol: float = 1e-10, form: str = "auto"
) -> SeriesValue:
    """f_a^side(t, x): joint density of exiting (-a, a) at time t through the
    given boundary ('+' for +a, '-' for -a), started at x."""
    if side not in ("+", "-"):
        raise ParameterError(f"side must be '+' or '-', got {side!r}")
    _check_geometry(a, t, x)
    if side == "-":
        x = -x
    form = _resolve_form(form, t, a)
    if form == "hitting":
        return _exit_side_hitting(a, t, x, tol)
    return _exit_side_eigen(a, t, x, tol)


def _hitting_tail_bound(w: float, a: float, t: float) -> float:
    """Certified bound on sum_{j>=0} g_t(w + 4ja) for w >= sqrt(t), where the
    hitting density g_t is decreasing.  Geometric with decreasing ratio."""
    ratio = (w + 4 * a) / w * math.exp(-4.0 * a * (2.0 * w + 4.0 * a) / (2.0 * t))
    if ratio >= 1.0:
        return math.inf
    return hitting_pdf(w, t) / (1.0 - ratio)


def _exit_side_hitting(a: float, t: float, x: float, tol: float) -> SeriesValue:
    sqrt_t = math.sqrt(t)
    total = 0.0
    abs_sum = 0.0
    for k in range(TERM_CAP):
        w_next = 4 * (k) * a + a - x
        if w_next >= sqrt_t:
            tail = _hitting_tail_bound(w_next, a, t)
            if tail <= tol:
                err = tail + (k + 1) * _EPS * abs_sum
                return SeriesValue(total, err, k)
        term = hitting_pdf(4 * k * a + a - x, t) - hitting_pdf(4 * k * a + 3 * a + x, t)
        total += term
        abs_sum += abs(term)
    raise _truncation_failure("exit_side_density[hitting]", tol, a=a, t=t, x=x)


def _exit_side_eigen(a: float, t: float, x: float, tol: float) -> SeriesValue:
    half = exit_time_density(a, t, x, tol=tol, form="eigen")
    pref = math.pi / (2.0 * a * a)
    decay = math.pi * math.pi * t / (2.0 * a * a)
    total = 0.5 * half.value
    abs_sum = 0.0
    for k in range(1, TERM_CAP):
        mag = pref * k * math.exp(-k * k * decay)
        ratio = (k + 1) / k * math.exp(-(2 * k + 1) * decay)
        if ratio < 1.0 and mag / (1.0 - ratio) <= 0.5 * tol:
            err = 0.5 * half.error_bound + mag / (1.0 - ratio) + k * _EPS * abs_sum
            return SeriesValue(total, err, half.terms_used + k)
        # sine series enters f^+ with sign -(-1)^k, i.e. + for odd k
        term = mag * math.sin(k * math.pi * x / a)
        total += term if k % 2 == 1 else -term
        abs_sum += abs(term)
    raise _truncation_failure("exit_side_density[eigen]", tol, a=a, t=t, x=x)


def pre_exit_density(
    a: float, T: float, x: float, tol: float = 1e-10, form: str = "auto"
) -> SeriesValue:
    """q_a(T, x): density of being at x at time T with no exit from (-a, a)
    up to T, started at 0.  Vanishes identically at x = +-a."""
    _check_geometry(a, T, x, open_interval=False)
    ax = abs(x)
    if ax == a:
        return SeriesValue(0.0, 0.0, 0)
    form = _resolve_form(form, T, a)
    if form == "hitting":
        total = norm_pdf(x, T)
        abs_sum = total
        for k in range(1, TERM_CAP):
            mag = norm_pdf(2 * k * a - ax, T) + norm_pdf(2 * k * a + ax, T)
            # image arguments grow by 2a each step: magnitudes decrease
            if mag <= tol:
                err = mag + k * _EPS * abs_sum
                return SeriesValue(total, err, k)
            total += -mag if k % 2 == 1 else mag
            abs_sum += mag
        raise _truncation_failure("pre_exit_density[image]", tol, a=a, T=T, x=x)
    decay = math.pi * math.pi * T / (8.0 * a * a)
    total = 0.0
    abs_sum = 0.0
    for k in range(TERM_CAP):
        n = 2 * k + 1
        mag = math.exp(-n * n * decay) / a
        ratio = math.exp(-8.0 * (k + 1) * decay)
        if ratio < 1.0 and mag / (1.0 - ratio) <= tol:
            err = mag / (1.0 - ratio) + (k + 1) * _EPS * abs_sum
            return SeriesValue(total, err, k)
        term = mag * math.cos(n * math.pi * x / (2.0 * a))
        total += term
        abs_sum += abs(term)
    raise _truncation_failure("pre_exit_density[eigen]", tol, a=a, T=T, x=x)


def boundary_derivatives(a: float, t: float, tol: float = 1e-12) -> BoundaryDerivatives:
    """Boundary spatial derivatives: d/dx f_a^+(t, x) at x -> a- (negative)
    and at x -> -a+ (positive), and d/dx q_a(t, x) at x -> a-, which equals
    -f_a(t, 0)."""
    if a <= 0.0 or t <= 0.0:
        raise ParameterError(f"need a > 0 and t > 0, got a={a}, t={t}")
    pref = math.pi * math.pi / (8.0 * a ** 3)
    decay = math.pi * math.pi * t / (8.0 * a * a)

    total = 0.0
    abs_sum = 0.0
    top = None
    for k in range(1, TERM_CAP):
        mag = pref * k * k * math.exp(-k * k * decay)
        ratio = ((k + 2) / (k + 1)) ** 2 * math.exp(-(2 * k + 3) * decay)
        if ratio < 1.0:
            nxt = pref * (k + 1) ** 2 * math.exp(-(k + 1) ** 2 * decay)
            if nxt / (1.0 - ratio) <= tol:
                total += mag
                top = SeriesValue(-total, nxt / (1.0 - ratio) + k * _EPS * abs_sum, k)
                break
        total += mag
        abs_sum += mag
    if top is None:
        raise _truncation_failure("boundary_derivatives[top]", tol, a=a, t=t)

    total = 0.0
    abs_sum = 0.0
    bottom = None
    for k in range(1, TERM_CAP):
        mag = pref * k * k * math.exp(-k * k * decay)
        nxt = pref * (k + 1) ** 2 * math.exp(-(k + 1) ** 2 * decay)
        if nxt <= tol and nxt <= mag:
            total += mag if k % 2 == 1 else -mag
            bottom = SeriesValue(total, nxt + k * _EPS * abs_sum, k)
            break
        total += mag if k % 2 == 1 else -mag
        abs_sum += mag
    if bottom is None:
        raise _truncation_failure("boundary_derivatives[bottom]", tol, a=a, t=t)

    f0 = exit_time_density(a, t, 0.0, tol=tol)
    pre = SeriesValue(-f0.value, f0.error_bound, f0.terms_used)
    return BoundaryDerivatives(top, bottom, pre)


def envelope_constant_cf(a: float, t: float) -> float:
    """Constant c_f with f_a^+(t, x) <= c_f * N(0,t)-pdf(a - x) * (a - x) and
    the partial-sum bounds of the hitting-form series (rejection envelopes):
    c_f = (2/t) sum_k [((2ka + 4a)^2/t + 1) exp(-2 k^2 a^2 / t)]."""
    if a <= 0.0 or t <= 0.0:
        raise ParameterError(f"need a > 0 and t > 0, got a={a}, t={t}")
    total = 0.0
    for k in range(TERM_CAP):
        term = ((2 * k * a + 4 * a) ** 2 / t + 1.0) * math.exp(-2.0 * k * k * a * a / t)
        total += term
        ratio = ((2 * k + 6) / (2 * k + 4)) ** 2 * math.exp(-2.0 * (2 * k + 1) * a * a / t)
        if ratio < 1.0 and term * ratio / (1.0 - ratio) <= 1e-15 * total:
            return 2.0 * total / t
    raise _truncation_failure("envelope_constant_cf", 1e-15, a=a, t=t)


def envelope_constant_cq(a: float, T: float) -> float:
    """Constant c_q with q_a(T, x) <= c_q * N(0,T)-pdf(x) * (a - |x|):
    c_q = (8a/T) sum_k (k + 1) exp(-2 k^2 a^2 / T)."""
    if a <= 0.0 or T <= 0.0:
        raise ParameterError(f"need a > 0 and T > 0, got a={a}, T={T}")
    total = 0.0
    for k in range(TERM_CAP):
        term = (k + 1) * math.exp(-2.0 * k * k * a * a / T)
        total += term
        ratio = (k + 2) / (k + 1) * math.exp(-2.0 * (2 * k + 1) * a * a / T)
        if ratio < 1.0 and term * ratio / (1.0 - ratio) <= 1e-15 * total:
            return 8.0 * a * total / T
    raise _truncation_failure("envelope_constant_cq", 1e-15, a=a, T=T)
