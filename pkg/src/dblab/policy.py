"""Policy calculus for the deadline bandit.

Closed forms and root searches for the building blocks of the optimal
schedule: the known-arm value, the value of doing throughout, the Hail-Mary
boundary belief q (the belief at which an agent entering the final doing
stretch is exactly willing to stop thinking), the thinking-preference slope
and its survival-weighted integral, the period-length maps, and a
diagnostic reconstruction of the switching profile along a schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .model import (
    ModelParams,
    PayoffStream,
    ProgressModel,
    RiskyArm,
    SafeArm,
    doing_time_to_reach,
    posterior_array,
    progress_value_array,
)

INFINITE = math.inf


class SearchCeilingError(RuntimeError):
    """A bracketing search hit its ceiling without finding the target."""


def search_ceiling(params: ModelParams, multiplier: float = 4.0) -> float:
    """Default upper end for time-axis root searches."""
    return max(20.0 / params.mu, 20.0 / params.lam, multiplier * params.T)


# ---------------------------------------------------------------------------
# benchmark values
# ---------------------------------------------------------------------------

def known_arm_value(params: ModelParams, tau: float) -> float:
    """Value of pulling an arm of known rate ``lam`` for a window ``tau``:
    ``(B - c/lam) * (1 - exp(-lam*tau))``."""
    if tau < 0.0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    return (params.B - params.c / params.lam) * -math.expm1(-params.lam * tau)


def do_throughout_value(params: ModelParams, p: float, tau: float) -> float:
    """Expected value of working the doing arm for all of ``tau`` at
    belief ``p``: the known-arm value when it works, a pure cost sink when
    it does not."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if tau < 0.0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    return p * known_arm_value(params, tau) - (1.0 - p) * params.c * tau


# ---------------------------------------------------------------------------
# Hail-Mary boundary belief
# ---------------------------------------------------------------------------

def hail_mary_belief_raw(params: ModelParams, model: ProgressModel,
                         tau: float) -> float:
    """The indifference belief before capping at one.

    ``mu*(V(tau) + c*tau) / (mu*(B + c*tau) + (lam - mu)*(B - U(tau)))``
    where U is the known-arm value.  The denominator stays positive for all
    admissible parameters, including lam == mu.
    """
    if tau < 0.0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    mu, lam, B, c = params.mu, params.lam, params.B, params.c
    num = mu * (model.value(tau) + c * tau)
    den = mu * (B + c * tau) + (lam - mu) * (B - known_arm_value(params, tau))
    return num / den


def hail_mary_belief(params: ModelParams, model: ProgressModel,
                     tau: float) -> float:
    """Belief on entering the final doing stretch of length ``tau`` at which
    the agent is exactly indifferent about one last instant of thinking;
    capped at one."""
    return min(1.0, hail_mary_belief_raw(params, model, tau))


def _hail_mary_belief_array(params: ModelParams, model: ProgressModel,
                            taus: np.ndarray) -> np.ndarray:
    t = np.asarray(taus, dtype=float)
    mu, lam, B, c = params.mu, params.lam, params.B, params.c
    v = progress_value_array(model, t)
    u = (B - c / lam) * -np.expm1(-lam * t)
    num = mu * (v + c * t)
    den = mu * (B + c * t) + (lam - mu) * (B - u)
    return np.minimum(1.0, num / den)


def hail_mary_time(params: ModelParams, model: ProgressModel, p: float,
                   ceiling: Optional[float] = None) -> float:
    """Smallest final-stretch length at which the boundary belief reaches
    ``p``; the inverse of :func:`hail_mary_belief`."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if ceiling is None:
        ceiling = search_ceiling(params)
    q = lambda t: hail_mary_belief(params, model, t)
    hi = min(1.0, ceiling)
    while q(hi) < p and hi < ceiling:
        hi = min(2.0 * hi, ceiling)
    if q(hi) < p:
        raise SearchCeilingError(
            f"boundary belief never reaches {p} below the search ceiling "
            f"{ceiling} (value there: {q(hi)})")
    # smallest crossing: locate the first sign change on a scan grid
    grid = np.linspace(0.0, hi, 257)
    vals = _hail_mary_belief_array(params, model, grid) - p
    idx = int(np.argmax(vals >= 0.0))
    if idx == 0:
        return 0.0
    return brentq(lambda t: q(t) - p, grid[idx - 1], grid[idx], xtol=1e-9)


# ---------------------------------------------------------------------------
# thinking-preference slope and integral
# ---------------------------------------------------------------------------

def preference_slope(params: ModelParams, model: ProgressModel, s: float,
                     p: float, xi: float) -> float:
    """Instantaneous drift of the relative preference for thinking, ``s``
    before an anchor point with ``xi`` remaining, at frozen belief ``p``:
    ``mu*V'(xi+s) + p*mu*lam*(V(xi+s) - B) + (mu - lam*p)*c``."""
    if s < 0.0 or xi < 0.0:
        raise ValueError("s and xi must be nonnegative")
    mu, lam, B, c = params.mu, params.lam, params.B, params.c
    return (mu * model.value(xi + s, 1)
            + p * mu * lam * (model.value(xi + s) - B)
            + (mu - lam * p) * c)


def _growth_ratio(x: float, tau: float) -> float:
    """(exp(x*tau) - 1)/x, continuous at x = 0."""
    if x == 0.0:
        return tau
    return math.expm1(x * tau) / x


def preference_integral(params: ModelParams, model: ProgressModel, tau: float,
                        p: float, xi: float, method: str = "auto") -> float:
    """Survival-weighted accumulation of the preference slope,
    ``integral of exp(mu*s) * slope(s) over s in [0, tau]``, anchored at
    indifference (value 0 at tau = 0).

    Exponential-decay families evaluate in closed form; the generic route
    is adaptive quadrature with absolute tolerance 1e-10.
    """
    if tau < 0.0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    if method not in ("auto", "closed", "quad"):
        raise ValueError(f"unknown method {method!r}")
    mu, lam, B, c = params.mu, params.lam, params.B, params.c
    exponential = isinstance(model, (SafeArm, PayoffStream))
    if method == "closed" and not exponential:
        raise ValueError("closed form available only for exponential families")
    if exponential and method in ("auto", "closed"):
        scale = model.limit()
        nu = model.nu
        a_coef = mu * scale * math.exp(-nu * xi) * (nu - p * lam)
        b_coef = p * mu * lam * (scale - B) + (mu - lam * p) * c
        return (a_coef * _growth_ratio(mu - nu, tau)
                + b_coef * _growth_ratio(mu, tau))
    points = None
    if isinstance(model, RiskyArm) and xi < model.stop_time < xi + tau:
        points = [model.stop_time - xi]
    val, _ = quad(
        lambda s: math.exp(mu * s) * preference_slope(params, model, s, p, xi),
        0.0, tau, epsabs=1e-10, epsrel=1e-12, limit=200, points=points)
    return val


# ---------------------------------------------------------------------------
# period-length maps
# ---------------------------------------------------------------------------

def thinking_span(params: ModelParams, model: ProgressModel, tau3: float,
                  ceiling: Optional[float] = None) -> float:
    """Length of the thinking stretch that ends exactly at indifference when
    the final doing stretch has length ``tau3``.

    Returns the smallest positive root of the preference integral at the
    boundary belief, or ``INFINITE`` when the preference never returns to
    indifference below the search ceiling.
    """
    if tau3 < 0.0:
        raise ValueError(f"tau3 must be nonnegative, got {tau3}")
    if ceiling is None:
        ceiling = search_ceiling(params)
    p = hail_mary_belief(params, model, tau3)
    if p >= 1.0 - 1e-12:
        raise ValueError(
            "no thinking period is defined at a boundary belief of one")
    slope0 = preference_slope(params, model, 0.0, p, tau3)
    if slope0 <= 0.0:
        # Thinking loses ground immediately; the indifference point is now.
        return 0.0
    if preference_slope(params, model, ceiling, p, tau3) >= 0.0:
        return INFINITE
    peak = brentq(lambda s: preference_slope(params, model, s, p, tau3),
                  0.0, ceiling, xtol=1e-9)
    acc = lambda t: preference_integral(params, model, t, p, tau3)
    if acc(ceiling) > 0.0:
        return INFINITE
    return brentq(acc, peak, ceiling, xtol=1e-9)


def initial_doing_span(params: ModelParams, model: ProgressModel,
                       tau3: float) -> float:
    """Length of the opening doing stretch that drags the prior exactly to
    the boundary belief of a final stretch ``tau3``."""
    q = hail_mary_belief(params, model, tau3)
    if q > params.p_bar + 1e-12:
        raise ValueError(
            f"boundary belief {q} exceeds the prior {params.p_bar}; "
            "no opening doing stretch can reach it")
    q = min(q, params.p_bar)
    if q <= 0.0:
        raise ValueError("boundary belief is zero; opening stretch undefined")
    return doing_time_to_reach(params.p_bar, params.lam, q)


# ---------------------------------------------------------------------------
# switching diagnostics along a schedule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SwitchingDiagnostics:
    """Reconstructed relative-preference path along a given schedule.

    grid            : remaining-time sample points, ascending from 0 to T
    y_values        : relative preference for thinking at each grid point
                      (positive favors thinking, negative favors doing)
    sign_pattern    : intervals (start, end, label) partitioning [0, T],
                      label in {"think-favored", "do-favored"}
    concavity_flags : curvature sign of the accumulated preference slope at
                      frozen belief at each interior thinking grid point,
                      0 elsewhere.  All -1 exactly when the slope decays
                      throughout each thinking stretch, which is the
                      single-sign-change property the thinking-span root
                      bracketing relies on.  (The normalized preference in
                      ``y_values`` folds in a survival factor and is *not*
                      globally concave while thinking, so its raw second
                      differences are not the right certificate.)
    """

    grid: np.ndarray
    y_values: np.ndarray
    sign_pattern: tuple
    concavity_flags: np.ndarray


def _unpack_schedule(schedule) -> tuple:
    if isinstance(schedule, (tuple, list)) and len(schedule) == 3:
        t1, t2, t3 = (float(x) for x in schedule)
    else:
        t1, t2, t3 = (float(schedule.tau1), float(schedule.tau2),
                      float(schedule.tau3))
    if min(t1, t2, t3) < -1e-12:
        raise ValueError(f"negative period length in schedule {(t1, t2, t3)}")
    return max(t1, 0.0), max(t2, 0.0), max(t3, 0.0)


def switching_profile(params: ModelParams, model: ProgressModel,
                      schedule, n_steps: int = 4096) -> SwitchingDiagnostics:
    """Integrate the co-state correction along the schedule's action path
    and reconstruct the relative preference for thinking on a sample grid.

    The correction starts at zero at the deadline and accumulates with a
    classical fourth-order scheme in remaining time, with nodes aligned to
    the schedule's switch points.
    """
    tau1, tau2, tau3 = _unpack_schedule(schedule)
    T = tau1 + tau2 + tau3
    if abs(T - params.T) > 1e-6:
        raise ValueError(
            f"schedule spans {T}, which does not match the horizon {params.T}")
    mu, lam, B, c, p_bar = params.mu, params.lam, params.B, params.c, params.p_bar

    def doing_time_at(tau_rem: float) -> float:
        # doing time accumulated by calendar time T - tau_rem
        if tau_rem <= tau3:
            return tau1 + (tau3 - tau_rem)
        if tau_rem <= tau3 + tau2:
            return tau1
        return max(T - tau_rem, 0.0)

    def eta_rate(tau_rem: float, active: float) -> float:
        a_doing = doing_time_at(tau_rem)
        pre = math.exp(-mu * (T - tau_rem - a_doing))
        decayed = p_bar * math.exp(-lam * a_doing)
        v = model.value(tau_rem)
        return pre * (mu * (1.0 - p_bar) * ((1.0 - active) * mu * v - c)
                      - (lam - mu) * decayed
                      * ((1.0 - active) * mu * v + active * lam * B - c))

    # segments in remaining time: final doing, thinking, opening doing
    segments = []
    if tau3 > 0.0:
        segments.append((0.0, tau3, 1.0))
    if tau2 > 0.0:
        segments.append((tau3, tau3 + tau2, 0.0))
    if tau1 > 0.0:
        segments.append((tau3 + tau2, T, 1.0))

    h_target = T / n_steps if T > 0.0 else 1.0
    grid_pts = [0.0]
    grid_actions = []  # action on the cell ending at the matching grid point
    eta_vals = [0.0]
    eta = 0.0
    for lo, hi, active in segments:
        n_seg = max(1, math.ceil((hi - lo) / h_target))
        h = (hi - lo) / n_seg
        t = lo
        for _ in range(n_seg):
            k1 = eta_rate(t, active)
            k2 = eta_rate(t + 0.5 * h, active)
            k3 = eta_rate(t + 0.5 * h, active)
            k4 = eta_rate(t + h, active)
            eta += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            t += h
            grid_pts.append(t)
            grid_actions.append(active)
            eta_vals.append(eta)

    grid = np.array(grid_pts)
    etas = np.array(eta_vals)
    a_path = np.array([doing_time_at(t) for t in grid])
    pre = np.exp(-mu * (T - grid - a_path))
    odds_mass = 1.0 - p_bar + p_bar * np.exp(-lam * a_path)
    belief = posterior_array(p_bar, lam, a_path)
    v_path = progress_value_array(model, grid)
    y = mu * v_path - belief * lam * B - etas / (pre * odds_mass)

    sign_pattern = _sign_intervals(grid, y)
    flags = np.zeros(len(grid), dtype=np.int8)
    thinking_cell = np.array(grid_actions) == 0.0
    v1_path = np.array([model.value(t, 1) for t in grid])
    slope = (mu * v1_path + belief * mu * lam * (v_path - B)
             + (mu - lam * belief) * c)
    for i in range(1, len(grid) - 1):
        cells = thinking_cell[i - 1:min(i + 2, len(thinking_cell))]
        if len(cells) and cells.all():
            drift = slope[i + 1] - slope[i - 1]
            flags[i] = int(np.sign(drift)) if abs(drift) > 1e-12 else 0
    return SwitchingDiagnostics(grid, y, sign_pattern, flags)


def _sign_intervals(grid: np.ndarray, y: np.ndarray) -> tuple:
    """Partition [grid[0], grid[-1]] into think-/do-favored intervals with
    boundaries at interpolated zero crossings."""
    if len(grid) < 2:
        return ((float(grid[0]), float(grid[-1]), "do-favored"),)
    labels = []
    bounds = [float(grid[0])]
    mid_lab = lambda ya, yb: "think-favored" if ya + yb > 0.0 else "do-favored"
    cur = mid_lab(y[0], y[1])
    for i in range(1, len(grid) - 1):
        nxt = mid_lab(y[i], y[i + 1])
        if nxt != cur:
            # zero crossing inside the cell that changed sign
            if y[i - 1] * y[i] < 0.0:
                lo, hi, ya, yb = grid[i - 1], grid[i], y[i - 1], y[i]
            else:
                lo, hi, ya, yb = grid[i], grid[i + 1], y[i], y[i + 1]
            cross = lo + (hi - lo) * (ya / (ya - yb)) if ya != yb else lo
            bounds.append(float(cross))
            labels.append(cur)
            cur = nxt
    bounds.append(float(grid[-1]))
    labels.append(cur)
    return tuple((bounds[i], bounds[i + 1], labels[i]) for i in range(len(labels)))
