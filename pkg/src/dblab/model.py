"""Model primitives: agent parameters, belief arithmetic, and the
value-of-progress family.

The agent splits effort between a risky "doing" arm (arrival rate ``lam``
when it works, which happens with prior probability ``p_bar``) and a safe
"thinking" arm (arrival rate ``mu``) whose arrival yields progress worth
``V(tau)`` when ``tau`` time remains.  Everything here is a pure function
of immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator


class ModelValidationError(ValueError):
    """A primitive violates one of its hard constructor invariants."""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ModelValidationError(msg)


# ---------------------------------------------------------------------------
# agent primitives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Agent primitives.

    p_bar : prior belief that the doing arm works, in (0, 1)
    lam   : arrival rate of the doing arm conditional on it working
    mu    : arrival rate of progress on the thinking arm
    c     : flow cost of effort
    B     : payoff of a solution
    T     : deadline (total time available)
    """

    p_bar: float
    lam: float
    mu: float
    c: float
    B: float
    T: float

    def __post_init__(self) -> None:
        _require(0.0 < self.p_bar < 1.0,
                 f"p_bar must lie strictly inside (0, 1), got {self.p_bar}")
        _require(self.lam > 0.0, f"lam must be positive, got {self.lam}")
        _require(self.mu > 0.0, f"mu must be positive, got {self.mu}")
        _require(self.c >= 0.0, f"c must be nonnegative, got {self.c}")
        _require(self.B > 0.0, f"B must be positive, got {self.B}")
        _require(self.T >= 0.0, f"T must be nonnegative, got {self.T}")
        _require(math.isfinite(self.T), f"T must be finite, got {self.T}")


# ---------------------------------------------------------------------------
# belief arithmetic
# ---------------------------------------------------------------------------

def posterior(p_bar: float, lam: float, doing_time: float) -> float:
    """Belief that the doing arm works after `doing_time` of unrewarded doing.

    Bayes rule against an exponential arrival:
    ``p_bar*exp(-lam*A) / (p_bar*exp(-lam*A) + 1 - p_bar)``.
    """
    if not 0.0 < p_bar < 1.0:
        raise ValueError(f"p_bar must lie in (0, 1), got {p_bar}")
    if lam <= 0.0:
        raise ValueError(f"lam must be positive, got {lam}")
    if doing_time < 0.0:
        raise ValueError(f"doing_time must be nonnegative, got {doing_time}")
    w = p_bar * math.exp(-lam * doing_time)
    return w / (w + 1.0 - p_bar)


def posterior_array(p_bar: float, lam: float, doing_time: np.ndarray) -> np.ndarray:
    """Vectorized :func:`posterior` for a nonnegative array of doing times."""
    a = np.asarray(doing_time, dtype=float)
    if np.any(a < 0.0):
        raise ValueError("doing_time entries must be nonnegative")
    w = p_bar * np.exp(-lam * a)
    return w / (w + 1.0 - p_bar)


def doing_time_to_reach(p_bar: float, lam: float, p_target: float) -> float:
    """Doing time that drags the belief from `p_bar` down to `p_target`.

    Inverse of :func:`posterior` in its time argument.  Beliefs only fall
    while doing, so `p_target` above `p_bar` is rejected.
    """
    if not 0.0 < p_bar < 1.0:
        raise ValueError(f"p_bar must lie in (0, 1), got {p_bar}")
    if lam <= 0.0:
        raise ValueError(f"lam must be positive, got {lam}")
    if not 0.0 < p_target <= p_bar:
        raise ValueError(
            f"p_target must lie in (0, p_bar]={(0.0, p_bar)}, got {p_target}: "
            "belief cannot rise without an arrival")
    odds_start = p_bar / (1.0 - p_bar)
    odds_end = p_target / (1.0 - p_target)
    return math.log(odds_start / odds_end) / lam


# ---------------------------------------------------------------------------
# value-of-progress family
# ---------------------------------------------------------------------------

class ProgressModel:
    """Value of progress as a function of remaining time.

    Subclasses implement ``value(tau, order)`` returning V, V' or V'' and
    ``limit()`` returning the no-deadline value V(inf).
    """

    family: str = "abstract"

    def value(self, tau: float, order: int = 0) -> float:
        raise NotImplementedError

    def limit(self) -> float:
        raise NotImplementedError


def _check_eval_args(tau: float, order: int) -> None:
    if not math.isfinite(tau) or tau < 0.0:
        raise ValueError(f"tau must be finite and nonnegative, got {tau}")
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")


@dataclass(frozen=True)
class SafeArm(ProgressModel):
    """Progress opens a known-rate conversion arm.

    Working the arm costs ``c_nu`` per unit time and delivers ``B_nu`` at
    rate ``nu``; its value over a remaining window tau is
    ``(1 - exp(-nu*tau)) * (B_nu - c_nu/nu)``.
    """

    nu: float
    B_nu: float
    c_nu: float = 0.0

    family = "SafeArm"

    def __post_init__(self) -> None:
        _require(self.nu > 0.0, f"nu must be positive, got {self.nu}")
        _require(self.c_nu >= 0.0, f"c_nu must be nonnegative, got {self.c_nu}")
        _require(self.nu * self.B_nu > self.c_nu,
                 "conversion arm must be worth working: nu*B_nu > c_nu")

    def value(self, tau: float, order: int = 0) -> float:
        _check_eval_args(tau, order)
        decay = math.exp(-self.nu * tau)
        slope0 = self.nu * self.B_nu - self.c_nu
        if order == 0:
            return (1.0 - decay) * (self.B_nu - self.c_nu / self.nu)
        if order == 1:
            return decay * slope0
        return -self.nu * decay * slope0

    def limit(self) -> float:
        return self.B_nu - self.c_nu / self.nu


@dataclass(frozen=True)
class RiskyArm(ProgressModel):
    """Progress opens a second risky arm that works with probability
    ``p_bar_nu``.

    The arm is pulled until the posterior on it reaches the myopic
    indifference belief ``c_nu/(nu*B_nu)``, which happens after
    ``stop_time`` of unrewarded pulling; beyond that the opportunity is
    worthless at the margin and the value is flat.
    """

    p_bar_nu: float
    nu: float
    B_nu: float
    c_nu: float

    family = "RiskyArm"

    def __post_init__(self) -> None:
        _require(0.0 < self.p_bar_nu < 1.0,
                 f"p_bar_nu must lie in (0, 1), got {self.p_bar_nu}")
        _require(self.nu > 0.0, f"nu must be positive, got {self.nu}")
        _require(self.c_nu > 0.0,
                 "c_nu must be positive for a finite stopping time")
        _require(self.nu * self.B_nu > self.c_nu,
                 "arm must be worth starting: nu*B_nu > c_nu")
        odds = self.p_bar_nu / (1.0 - self.p_bar_nu)
        arg = odds * (self.nu * self.B_nu - self.c_nu) / self.c_nu
        _require(arg > 1.0,
                 "no valid stopping time: the posterior starts at or below "
                 "the indifference belief c_nu/(nu*B_nu)")

    @cached_property
    def stop_time(self) -> float:
        """Pulling time after which the arm is abandoned."""
        odds = self.p_bar_nu / (1.0 - self.p_bar_nu)
        arg = odds * (self.nu * self.B_nu - self.c_nu) / self.c_nu
        return math.log(arg) / self.nu

    def value(self, tau: float, order: int = 0) -> float:
        _check_eval_args(tau, order)
        p, nu, b, cc = self.p_bar_nu, self.nu, self.B_nu, self.c_nu
        if tau <= self.stop_time:
            decay = math.exp(-nu * tau)
            if order == 0:
                return p * (1.0 - decay) * (b - cc / nu) - (1.0 - p) * cc * tau
            if order == 1:
                return p * decay * (nu * b - cc) - (1.0 - p) * cc
            return -nu * p * decay * (nu * b - cc)
        if order == 0:
            return self.limit()
        return 0.0

    def limit(self) -> float:
        # Flat-region value; continuous with the active branch at stop_time.
        p, nu, b, cc = self.p_bar_nu, self.nu, self.B_nu, self.c_nu
        return p * b - cc / nu - (1.0 - p) * cc * self.stop_time


@dataclass(frozen=True)
class TimeVarying(ProgressModel):
    """Progress opens a conversion opportunity whose hazard drifts in
    calendar time: rate ``nu*exp(alpha + beta*t)`` after t of conversion
    effort, paying ``B`` against flow cost ``c``.

    The value is the expected discounted-by-survival payoff of riding that
    hazard for the remaining window; it has no closed form and is evaluated
    by adaptive quadrature in cumulative-hazard units.
    """

    nu: float
    alpha: float
    beta: float
    B: float
    c: float

    family = "TimeVarying"

    def __post_init__(self) -> None:
        _require(self.nu > 0.0, f"nu must be positive, got {self.nu}")
        _require(self.B > 0.0, f"B must be positive, got {self.B}")
        _require(self.c >= 0.0, f"c must be nonnegative, got {self.c}")

    def _rate(self, t: float) -> float:
        return self.nu * math.exp(self.alpha + self.beta * t)

    def _cum_hazard(self, t: float) -> float:
        base = self.nu * math.exp(self.alpha)
        if self.beta == 0.0:
            return base * t
        return base * math.expm1(self.beta * t) / self.beta

    def value(self, tau: float, order: int = 0) -> float:
        _check_eval_args(tau, order)
        if order == 0:
            # Substituting u = cumulative hazard turns the integrand into
            # exp(-u) * (B - c/rate(u)) with rate(u) = base + beta*u.
            base = self.nu * math.exp(self.alpha)
            upper = self._cum_hazard(tau)
            if upper == 0.0:
                return 0.0
            val, _ = quad(
                lambda u: math.exp(-u) * (self.B - self.c / (base + self.beta * u)),
                0.0, upper, epsabs=1e-10, epsrel=1e-12, limit=200)
            return val
        rate = self._rate(tau)
        surv = math.exp(-self._cum_hazard(tau))
        if order == 1:
            return surv * (rate * self.B - self.c)
        return surv * (self.beta * rate * self.B - rate * (rate * self.B - self.c))

    def limit(self) -> float:
        base = self.nu * math.exp(self.alpha)
        if self.beta > 0.0:
            val, _ = quad(
                lambda u: math.exp(-u) * (self.B - self.c / (base + self.beta * u)),
                0.0, np.inf, epsabs=1e-10, epsrel=1e-12, limit=200)
            return val
        if self.beta == 0.0:
            return self.B - self.c / base
        # Decaying hazard: total hazard is finite, so once the rate has
        # burned out the flow cost accumulates without bound.
        total_hazard = base / abs(self.beta)
        if self.c == 0.0:
            return self.B * -math.expm1(-total_hazard)
        return -math.inf


@dataclass(frozen=True)
class PayoffStream(ProgressModel):
    """Progress triggers a mean-reverting payoff stream whose expected
    level at the deadline is ``B_nu*(1 - exp(-nu*tau))``."""

    nu: float
    B_nu: float

    family = "PayoffStream"

    def __post_init__(self) -> None:
        _require(self.nu > 0.0, f"nu must be positive, got {self.nu}")
        _require(self.B_nu > 0.0, f"B_nu must be positive, got {self.B_nu}")

    def value(self, tau: float, order: int = 0) -> float:
        _check_eval_args(tau, order)
        decay = math.exp(-self.nu * tau)
        if order == 0:
            return self.B_nu * (1.0 - decay)
        if order == 1:
            return self.nu * self.B_nu * decay
        return -self.nu * self.nu * self.B_nu * decay

    def limit(self) -> float:
        return self.B_nu


@dataclass(frozen=True)
class Tabulated(ProgressModel):
    """Escape hatch: a value-of-progress curve given as (tau, V) samples,
    interpolated by a monotone piecewise cubic."""

    taus: tuple
    values: tuple

    family = "Tabulated"

    def __post_init__(self) -> None:
        _require(len(self.taus) == len(self.values),
                 "taus and values must have equal length")
        _require(len(self.taus) >= 4, "need at least 4 grid points")
        t = np.asarray(self.taus, dtype=float)
        v = np.asarray(self.values, dtype=float)
        _require(bool(np.all(np.diff(t) > 0.0)), "taus must be strictly increasing")
        _require(t[0] == 0.0, "grid must start at tau=0")
        _require(v[0] == 0.0, "value at tau=0 must be 0")
        _require(bool(np.all(np.diff(v) >= 0.0)), "values must be nondecreasing")

    @cached_property
    def _interp(self) -> PchipInterpolator:
        return PchipInterpolator(np.asarray(self.taus, dtype=float),
                                 np.asarray(self.values, dtype=float))

    def value(self, tau: float, order: int = 0) -> float:
        _check_eval_args(tau, order)
        if tau > self.taus[-1]:
            raise ValueError(
                f"tau={tau} outside tabulated range [0, {self.taus[-1]}]")
        if order == 0:
            return float(self._interp(tau))
        return float(self._interp.derivative(order)(tau))

    def limit(self) -> float:
        if abs(self.values[-1] - self.values[-2]) >= 1e-8:
            raise ValueError(
                "tabulated grid is not flattened at the tail; cannot read "
                "off the no-deadline value")
        return float(self.values[-1])


_FAMILIES = {
    "SafeArm": SafeArm,
    "RiskyArm": RiskyArm,
    "TimeVarying": TimeVarying,
    "PayoffStream": PayoffStream,
    "Tabulated": Tabulated,
}


def progress_model_from_dict(spec: dict) -> ProgressModel:
    """Build a family member from a plain dict with a ``family`` key."""
    kwargs = dict(spec)
    name = kwargs.pop("family", None)
    if name not in _FAMILIES:
        raise ModelValidationError(
            f"unknown progress-model family {name!r}; "
            f"expected one of {sorted(_FAMILIES)}")
    cls = _FAMILIES[name]
    if name == "Tabulated":
        kwargs = {"taus": tuple(kwargs["taus"]), "values": tuple(kwargs["values"])}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ModelValidationError(f"bad parameters for {name}: {exc}") from exc


def progress_value(model: ProgressModel, tau: float, order: int = 0) -> float:
    """V(tau), V'(tau) or V''(tau) for any family member."""
    return model.value(tau, order)


def progress_value_limit(model: ProgressModel) -> float:
    """The no-deadline value V(inf)."""
    return model.limit()


def progress_value_array(model: ProgressModel, taus: np.ndarray) -> np.ndarray:
    """Vectorized V(tau) with closed-form fast paths for the exponential
    families; other families fall back to a scalar loop."""
    t = np.asarray(taus, dtype=float)
    if isinstance(model, SafeArm):
        return (1.0 - np.exp(-model.nu * t)) * (model.B_nu - model.c_nu / model.nu)
    if isinstance(model, PayoffStream):
        return model.B_nu * (1.0 - np.exp(-model.nu * t))
    if isinstance(model, RiskyArm):
        p, nu, b, cc = model.p_bar_nu, model.nu, model.B_nu, model.c_nu
        active = p * (1.0 - np.exp(-nu * t)) * (b - cc / nu) - (1.0 - p) * cc * t
        return np.where(t <= model.stop_time, active, model.limit())
    return np.array([model.value(x) for x in np.atleast_1d(t)])


# ---------------------------------------------------------------------------
# validity checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    witness_tau: Optional[float] = None
    witness_value: Optional[float] = None
    detail: str = ""
    advisory: bool = False


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple
    overall: bool

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def failure_names(self) -> list:
        return [c.name for c in self.checks if not c.passed and not c.advisory]


def _check_grid(params: ModelParams, model: ProgressModel, n_grid: int) -> np.ndarray:
    hi = max(10.0 / params.lam, 10.0 / params.mu, 2.0 * params.T)
    if isinstance(model, Tabulated):
        hi = min(hi, model.taus[-1])
    if isinstance(model, RiskyArm):
        # The family's stated conditions hold while the second arm is still
        # worth pulling; beyond its stopping time the value is flat by design.
        hi = min(hi, model.stop_time)
    return np.geomspace(hi * 1e-6, hi, n_grid)


def validate_model(params: ModelParams, model: ProgressModel,
                   n_grid: int = 512) -> ValidationReport:
    """Check the standing conditions on the value of progress.

    Conditions: V(0)=0, V strictly increasing, relative concavity
    -V''/V' >= p_bar*lam, c/mu < V(inf) <= B + c/mu, and (when mu > lam) a
    monotone deadline-salience ratio.  Each condition is sampled on a
    geometric grid; a failing entry carries a concrete witness point.
    Derivative-based checks on tabulated curves are advisory only.
    """
    checks: list = []
    grid = _check_grid(params, model, n_grid)
    advisory_derivs = isinstance(model, Tabulated)

    v0 = model.value(0.0)
    checks.append(CheckResult("value_at_zero", abs(v0) <= 1e-12, 0.0, v0))

    # strict increase: use first derivative (value differences for Tabulated)
    if advisory_derivs:
        vals = progress_value_array(model, grid)
        diffs = np.diff(vals)
        bad = np.where(diffs <= 0.0)[0]
        ok = bad.size == 0
        wt, wv = ((float(grid[bad[0] + 1]), float(diffs[bad[0]])) if not ok
                  else (None, None))
        checks.append(CheckResult("strictly_increasing", ok, wt, wv))
    else:
        d1 = np.array([model.value(x, 1) for x in grid])
        bad = np.where(d1 <= 0.0)[0]
        ok = bad.size == 0
        wt, wv = ((float(grid[bad[0]]), float(d1[bad[0]])) if not ok
                  else (None, None))
        checks.append(CheckResult("strictly_increasing", ok, wt, wv))

    # relative concavity: -V''/V' >= p_bar*lam
    floor = params.p_bar * params.lam
    d1 = np.array([model.value(x, 1) for x in grid])
    d2 = np.array([model.value(x, 2) for x in grid])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(d1 > 0.0, -d2 / d1, np.inf)
    bad = np.where(ratio < floor - 1e-9)[0]
    ok = bad.size == 0
    wt, wv = ((float(grid[bad[0]]), float(ratio[bad[0]])) if not ok
              else (None, None))
    checks.append(CheckResult("relative_concavity", ok, wt, wv,
                              detail=f"required >= {floor}",
                              advisory=advisory_derivs))

    # limits
    try:
        vinf = model.limit()
        ok_low = vinf > params.c / params.mu
        checks.append(CheckResult(
            "limit_exceeds_thinking_cost", ok_low, None, vinf,
            detail=f"required > {params.c / params.mu}"))
        ok_high = vinf <= params.B + params.c / params.mu + 1e-9
        checks.append(CheckResult(
            "limit_within_reward_bound", ok_high, None, vinf,
            detail=f"required <= {params.B + params.c / params.mu}"))
    except ValueError as exc:
        checks.append(CheckResult("limit_exceeds_thinking_cost", False,
                                  None, None, detail=str(exc)))
        checks.append(CheckResult("limit_within_reward_bound", False,
                                  None, None, detail=str(exc)))

    # deadline-salience monotonicity, relevant only when mu > lam
    if params.mu > params.lam and params.lam * params.B > params.c:
        from .policy import hail_mary_belief_raw  # late import: avoids a cycle

        mu, lam, B, c = params.mu, params.lam, params.B, params.c
        u2 = -lam * (lam * B - c) * np.exp(-lam * grid)
        f = np.array([mu * model.value(x, 2) / ((mu - lam) * uu)
                      - hail_mary_belief_raw(params, model, x)
                      for x, uu in zip(grid, u2)])
        diffs = np.diff(f)
        tol = 1e-9 * max(1.0, float(np.max(np.abs(f))))
        up_ok = bool(np.all(diffs >= -tol))
        down_ok = bool(np.all(diffs <= tol))
        ok = up_ok or down_ok
        wt = wv = None
        if not ok:
            idx = int(np.where(diffs < -tol)[0][0]) if not up_ok else 0
            wt, wv = float(grid[idx]), float(diffs[idx])
        checks.append(CheckResult("deadline_salience_monotone", ok, wt, wv,
                                  advisory=advisory_derivs))

    overall = all(c.passed for c in checks if not c.advisory)
    return ValidationReport(tuple(checks), overall)


# ---------------------------------------------------------------------------
# terminal incentives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoShirkResult:
    """Whether the agent still wants to pull an arm at the deadline."""

    ok: bool
    threshold: float
    belief_floor: float

    def __bool__(self) -> bool:
        return self.ok


def no_shirk_check(params: ModelParams, terminal_belief: float) -> NoShirkResult:
    """True iff the terminal belief clears the incentive bound c/(lam*B).

    Also exposes the model-free floor on the terminal belief: the posterior
    after doing for the whole horizon.
    """
    if not 0.0 < terminal_belief < 1.0:
        raise ValueError(
            f"terminal_belief must lie in (0, 1), got {terminal_belief}")
    threshold = params.c / (params.lam * params.B)
    floor = posterior(params.p_bar, params.lam, params.T)
    return NoShirkResult(terminal_belief >= threshold, threshold, floor)
