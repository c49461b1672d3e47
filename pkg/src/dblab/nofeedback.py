"""Closed-form probability objects for the unobserved-progress variant.

Here progress arrivals are invisible: the agent only sees solutions.  The
thinking pipeline is a two-stage exponential race (progress at rate ``mu``,
then conversion at rate ``nu``); accumulated thinking time therefore turns
into latent optimism about having progressed already.  Everything below is
a function of accumulated arm time, not calendar time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import _require


@dataclass(frozen=True)
class NoFeedbackModel:
    """Primitives for the unobserved-progress variant.

    ``limit_mode`` must be set to allow equal stage rates, in which case the
    two-stage race degenerates to a gamma arrival and dedicated limit
    formulas replace the generic ones.
    """

    mu: float
    nu: float
    B: float
    c: float
    p_bar: float
    lam: float
    limit_mode: bool = False

    def __post_init__(self) -> None:
        _require(self.mu > 0.0, f"mu must be positive, got {self.mu}")
        _require(self.nu > 0.0, f"nu must be positive, got {self.nu}")
        _require(self.B > 0.0, f"B must be positive, got {self.B}")
        _require(self.c >= 0.0, f"c must be nonnegative, got {self.c}")
        _require(0.0 < self.p_bar < 1.0,
                 f"p_bar must lie in (0, 1), got {self.p_bar}")
        _require(self.lam > 0.0, f"lam must be positive, got {self.lam}")
        if self.mu == self.nu and not self.limit_mode:
            raise ValueError(
                "equal stage rates require limit_mode=True (the generic "
                "formulas are singular at mu == nu)")


def _check_arm_time(a) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("arm time must be nonnegative")
    return arr


def _scalar_like(a, value):
    return float(value) if np.ndim(a) == 0 else value


def no_solution_prob(nf: NoFeedbackModel, thinking_time) -> float:
    """CDF of the thinking pipeline's solution time at accumulated thinking
    time ``thinking_time``: progress followed by conversion."""
    a = _check_arm_time(thinking_time)
    mu, nu = nf.mu, nf.nu
    if mu == nu:
        cdf = -np.expm1(-mu * a) - mu * a * np.exp(-mu * a)
    else:
        cdf = 1.0 - (mu * np.exp(-nu * a) - nu * np.exp(-mu * a)) / (mu - nu)
    return _scalar_like(thinking_time, cdf)


def solution_density(nf: NoFeedbackModel, thinking_time) -> float:
    """Density of the thinking pipeline's solution time."""
    a = _check_arm_time(thinking_time)
    mu, nu = nf.mu, nf.nu
    if mu == nu:
        dens = mu * mu * a * np.exp(-mu * a)
    else:
        dens = (np.exp(-nu * a) - np.exp(-mu * a)) * mu * nu / (mu - nu)
    return _scalar_like(thinking_time, dens)


def progress_given_no_solution(nf: NoFeedbackModel, thinking_time) -> float:
    """Probability that progress has already arrived, conditional on no
    solution after ``thinking_time`` of thinking.  Grows with thinking time:
    latent optimism."""
    a = _check_arm_time(thinking_time)
    mu, nu = nf.mu, nf.nu
    if mu == nu:
        val = mu * a / (1.0 + mu * a)
    else:
        val = (mu * (np.exp(-mu * a) - np.exp(-nu * a))
               / (nu * np.exp(-mu * a) - mu * np.exp(-nu * a)))
    return _scalar_like(thinking_time, val)


def doing_density(nf: NoFeedbackModel, doing_time) -> float:
    """Unconditional density of a doing-arm solution at accumulated doing
    time ``doing_time``: the prior-weighted exponential arrival."""
    a = _check_arm_time(doing_time)
    val = nf.lam * nf.p_bar * np.exp(-nf.lam * a)
    return _scalar_like(doing_time, val)
