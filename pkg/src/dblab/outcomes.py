"""Outcome accounting for a fixed doing/thinking/doing schedule.

Given a schedule (tau1, tau2, tau3) executed against the true data
generating process -- a doing arm that pays off at rate lambda only if the
problem is solvable, and a thinking arm whose progress converts into a
solution at a known rate nu -- these routines compute success
probabilities by route, the expected time spent before stopping, full
occupancy trajectories, and Monte Carlo estimates of the same quantities.
"""

from __future__ import annotations

import dataclasses
import math
import os
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .model import ModelParams, ModelValidationError, ProgressModel
from .solver import SolverError, solve

Schedule = namedtuple("Schedule", ["tau1", "tau2", "tau3"])

_RATE_TOL = 1e-9


def _as_taus(schedule) -> tuple:
    if hasattr(schedule, "tau1"):
        taus = (schedule.tau1, schedule.tau2, schedule.tau3)
    else:
        tau1, tau2, tau3 = schedule
        taus = (float(tau1), float(tau2), float(tau3))
    if any(t < 0.0 for t in taus):
        raise ValueError(f"schedule spans must be nonnegative, got {taus}")
    return taus


def _rates_close(mu: float, nu: float) -> bool:
    return abs(mu - nu) <= _RATE_TOL * max(mu, nu)


@dataclass(frozen=True)
class OutcomeSummary:
    """Success probability split by route; total is the exact sum."""

    p_do_initial: float
    p_think: float
    p_hailmary: float
    p_total: float = dataclasses.field(init=False)

    def __post_init__(self) -> None:
        total = self.p_do_initial + self.p_think + self.p_hailmary
        object.__setattr__(self, "p_total", total)


@dataclass(frozen=True)
class SimConfig:
    reps: int = 100_000
    seed: int = 0
    stream_policy: str = "variable-major"

    def __post_init__(self) -> None:
        if self.reps <= 0:
            raise ValueError(f"reps must be positive, got {self.reps}")
        if self.stream_policy != "variable-major":
            raise ValueError(
                f"unsupported stream policy {self.stream_policy!r}")


@dataclass(frozen=True)
class SimResult:
    success_rate: float
    success_se: float
    work_mean: float
    work_se: float
    reps: int
    seed: int


def conversion_rate(model: ProgressModel = None, nu: float = None) -> float:
    """Resolve the progress-to-solution conversion rate: explicit argument
    wins, otherwise taken off the progress model."""
    if nu is not None:
        if nu <= 0.0:
            raise ValueError(f"conversion rate must be positive, got {nu}")
        return float(nu)
    rate = getattr(model, "nu", None)
    if rate is None:
        raise ValueError(
            "no conversion rate: pass nu explicitly or use a model that "
            "carries one")
    return float(rate)


def route_probabilities(schedule, params: ModelParams, nu: float
                        ) -> OutcomeSummary:
    """Success probability of each route under the schedule.

    Routes: solution from the initial doing block; progress during the
    thinking block converting before the deadline; and a late doing
    solution after thinking came up empty.
    """
    tau1, tau2, tau3 = _as_taus(schedule)
    p_bar, lam, mu = params.p_bar, params.lam, params.mu
    p_do = p_bar * -math.expm1(-lam * tau1)
    pref = p_bar * math.exp(-lam * tau1) + 1.0 - p_bar
    if _rates_close(mu, nu):
        converted = (-math.expm1(-mu * tau2)
                     - mu * tau2 * math.exp(-mu * (tau2 + tau3)))
    else:
        cross = (mu * (math.exp(-mu * tau2 - nu * tau3)
                       - math.exp(-nu * (tau2 + tau3))) / (nu - mu))
        converted = -math.expm1(-mu * tau2) - cross
    p_think = pref * converted
    p_hail = (p_bar * math.exp(-lam * tau1) * math.exp(-mu * tau2)
              * -math.expm1(-lam * tau3))
    return OutcomeSummary(p_do_initial=p_do, p_think=p_think,
                          p_hailmary=p_hail)


def _pending_conversion_weight(mu: float, nu: float, tau2: float) -> float:
    """Probability mass of progress that arrived during the thinking block
    but has not converted by its end."""
    if _rates_close(mu, nu):
        return mu * tau2 * math.exp(-mu * tau2)
    return mu * (math.exp(-mu * tau2) - math.exp(-nu * tau2)) / (nu - mu)


def expected_work_time(schedule, params: ModelParams, nu: float) -> float:
    """Expected calendar time until a solution arrives or the deadline
    hits, i.e. the integral of the no-solution probability over [0, T]."""
    tau1, tau2, tau3 = _as_taus(schedule)
    p_bar, lam, mu = params.p_bar, params.lam, params.mu
    pref = p_bar * math.exp(-lam * tau1) + 1.0 - p_bar

    def survive_phase1(t: float) -> float:
        return p_bar * math.exp(-lam * t) + 1.0 - p_bar

    if _rates_close(mu, nu):
        def pipeline_alive(u: float) -> float:
            return (1.0 + mu * u) * math.exp(-mu * u)
    else:
        def pipeline_alive(u: float) -> float:
            return ((mu * math.exp(-nu * u) - nu * math.exp(-mu * u))
                    / (mu - nu))

    c_pro = _pending_conversion_weight(mu, nu, tau2)
    decay2 = math.exp(-mu * tau2)

    def survive_phase3(u2: float) -> float:
        no_progress = decay2 * (p_bar * math.exp(-lam * (tau1 + u2))
                                + 1.0 - p_bar)
        pending = pref * c_pro * math.exp(-nu * u2)
        return no_progress + pending

    total = 0.0
    if tau1 > 0.0:
        total += quad(survive_phase1, 0.0, tau1, epsabs=1e-10)[0]
    if tau2 > 0.0:
        total += pref * quad(pipeline_alive, 0.0, tau2, epsabs=1e-10)[0]
    if tau3 > 0.0:
        total += quad(survive_phase3, 0.0, tau3, epsabs=1e-10)[0]
    return total


def backload(schedule) -> Schedule:
    """Move the initial doing block to the end: (a, b, d) -> (0, a+b, a+d).

    Total doing and thinking time are preserved, but all doing now happens
    after thinking has had its chance.
    """
    tau1, tau2, tau3 = _as_taus(schedule)
    return Schedule(0.0, tau1 + tau2, tau1 + tau3)


def trajectory_probabilities(schedule, params: ModelParams, nu: float,
                             n_points: int = 401) -> dict:
    """Occupancy curves over calendar time.

    Returns arrays over ``t`` in [0, total span]: probability that
    progress has been made (solution via conversion may follow or already
    have happened), that a solution arrived straight from doing, and that
    neither has happened.  The three doing/progress states partition the
    sample space, so the curves sum to one.
    """
    if n_points < 2:
        raise ValueError(f"n_points must be at least 2, got {n_points}")
    tau1, tau2, tau3 = _as_taus(schedule)
    p_bar, lam, mu = params.p_bar, params.lam, params.mu
    span = tau1 + tau2 + tau3
    t = np.linspace(0.0, span, n_points)
    pref = p_bar * math.exp(-lam * tau1) + 1.0 - p_bar

    think_time = np.clip(t - tau1, 0.0, tau2)
    p_progress = pref * -np.expm1(-mu * think_time)

    early = p_bar * -np.expm1(-lam * np.minimum(t, tau1))
    late_doing = np.clip(t - tau1 - tau2, 0.0, tau3)
    late = (p_bar * math.exp(-lam * tau1) * math.exp(-mu * tau2)
            * -np.expm1(-lam * late_doing))
    p_solution = early + late

    p_neither = 1.0 - p_progress - p_solution
    return {"t": t, "p_progress": p_progress, "p_solution": p_solution,
            "p_neither": p_neither}


def simulate(schedule, params: ModelParams, nu: float,
             config: SimConfig = SimConfig()) -> SimResult:
    """Monte Carlo of the schedule against the true process.

    Draws are variable-major: one Philox-seeded array per primitive
    random quantity (solvability, doing clock, progress clock, conversion
    clock), each of length ``reps``, in that fixed order, so replication
    j reads column j of every array and results are reproducible for a
    given (seed, reps) pair.
    """
    tau1, tau2, tau3 = _as_taus(schedule)
    T = tau1 + tau2 + tau3
    rng = np.random.Generator(np.random.Philox(key=config.seed))
    reps = config.reps
    solvable = rng.random(reps) < params.p_bar
    t_do = rng.exponential(1.0 / params.lam, reps)
    t_think = rng.exponential(1.0 / params.mu, reps)
    t_conv = rng.exponential(1.0 / nu, reps)

    # The doing clock is shared by both doing blocks: by memorylessness the
    # time-on-arm until a doing arrival is a single exponential draw.
    early = solvable & (t_do < tau1)
    progress = t_think < tau2
    convert = progress & (t_think + t_conv <= tau2 + tau3)
    hail = solvable & ~progress & (t_do >= tau1) & (t_do < tau1 + tau3)

    success = early | convert | hail
    sol_time = np.full(reps, np.inf)
    sol_time[early] = t_do[early]
    t_convert = tau1 + t_think + t_conv
    sol_time[convert] = np.minimum(sol_time[convert], t_convert[convert])
    t_hail = tau2 + t_do
    sol_time[hail] = np.minimum(sol_time[hail], t_hail[hail])
    work = np.minimum(sol_time, T)

    rate = float(success.mean())
    rate_se = math.sqrt(max(rate * (1.0 - rate), 0.0) / reps)
    work_mean = float(work.mean())
    work_se = float(work.std(ddof=1) / math.sqrt(reps))
    return SimResult(success_rate=rate, success_se=rate_se,
                     work_mean=work_mean, work_se=work_se,
                     reps=reps, seed=config.seed)


_SWEEP_COLUMNS = ("grid_value", "tau1", "tau2", "tau3", "structure",
                  "p_total", "p_do_initial", "p_think", "p_hailmary",
                  "p_total_backloaded", "expected_work")


def _sweep_point(params: ModelParams, model: ProgressModel, variable: str,
                 value: float, nu: float) -> dict:
    row = dict.fromkeys(_SWEEP_COLUMNS, float("nan"))
    row["grid_value"] = value
    try:
        point = dataclasses.replace(params, **{variable: value})
        sched = solve(point, model)
        routes = route_probabilities(sched, point, nu)
        flipped = route_probabilities(backload(sched), point, nu)
        row.update(tau1=sched.tau1, tau2=sched.tau2, tau3=sched.tau3,
                   structure=sched.structure,
                   p_total=routes.p_total,
                   p_do_initial=routes.p_do_initial,
                   p_think=routes.p_think,
                   p_hailmary=routes.p_hailmary,
                   p_total_backloaded=flipped.p_total,
                   expected_work=expected_work_time(sched, point, nu))
    except (SolverError, ModelValidationError, ValueError) as err:
        row["structure"] = f"ERROR:{type(err).__name__}"
    return row


def sweep(params: ModelParams, model: ProgressModel, variable: str,
          grid, *, nu: float = None, max_workers: int = None) -> list:
    """Solve and score the schedule across a parameter grid.

    ``variable`` is the ModelParams field to vary ("T" or "p_bar").
    Points that fail to solve get an ERROR structure tag and NaN metrics
    instead of aborting the sweep.  Parallelism is capped by the
    DBLAB_THREADS environment variable (default 1); rows always come back
    in grid order.
    """
    if variable not in ("T", "p_bar"):
        raise ValueError(f"variable must be 'T' or 'p_bar', got {variable!r}")
    rate = conversion_rate(model, nu)
    values = [float(v) for v in grid]
    if max_workers is None:
        max_workers = int(os.environ.get("DBLAB_THREADS", "1"))
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(
                lambda v: _sweep_point(params, model, variable, v, rate),
                values))
    else:
        rows = [_sweep_point(params, model, variable, v, rate)
                for v in values]
    return rows
