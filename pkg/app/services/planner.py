"""
DeCo planner: picks (τ, δ) minimizing the convergence factor φ on a bubble-free pipeline
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from numbers import Real
from typing import Dict, Iterable, Optional, Union

from app.core.config import settings
from app.services.timing import (
    Number,
    TimingParams,
    as_like,
    delta_floor,
    delta_star,
    t_avg_closed_form,
    throughput_efficiency,
)

logger = logging.getLogger(__name__)


class PlannerError(ValueError):
    """Invalid planner input"""


class ConvergenceRegime(str, Enum):
    """Which factor the planner minimizes"""
    STANDARD = "standard"  # φ
    HIGH_HETEROGENEITY = "high-heterogeneity"  # φ'


@dataclass(frozen=True)
class Plan:
    """Planner output"""
    tau: int
    delta: Number
    phi: Number
    clamped: bool = False

    def to_dict(self) -> Dict[str, Union[int, float, bool]]:
        return {
            "tau": self.tau,
            "delta": float(self.delta),
            "phi": float(self.phi),
            "clamped": self.clamped,
        }


@dataclass(frozen=True)
class InfeasiblePlan:
    """No grid pair keeps the pipeline bubble-free"""
    reason: str

    def to_dict(self) -> Dict[str, str]:
        return {"status": "infeasible", "reason": self.reason}


def _check_delta(delta: Number) -> None:
    if not isinstance(delta, Real) or not math.isfinite(delta) or delta <= 0:
        raise PlannerError(f"delta must be > 0, got {delta!r}")
    if delta > 1:
        raise PlannerError(f"delta must be <= 1, got {delta!r}")


def _shrink_power(delta: Number, tau: int) -> Number:
    """(1 - δ/2)^τ"""
    return (1 - delta / 2) ** tau


def phi(delta: Number, tau: int) -> Number:
    """φ = (1 - δ) / (δ (1 - δ/2)^τ); 0 when δ = 1"""
    _check_delta(delta)
    if delta == 1:
        return delta * 0
    if tau > settings.phi_log_space_tau and not isinstance(delta, Fraction):
        log_phi = math.log1p(-delta) - math.log(delta) - tau * math.log1p(-delta / 2)
        return math.exp(log_phi)
    return (1 - delta) / (delta * _shrink_power(delta, tau))


def phi_prime(delta: Number, tau: int) -> Number:
    """φ' = (1 - δ) / (δ² (1 - δ/2)^τ), the high-heterogeneity factor"""
    _check_delta(delta)
    if delta == 1:
        return delta * 0
    if tau > settings.phi_log_space_tau and not isinstance(delta, Fraction):
        log_phi = math.log1p(-delta) - 2 * math.log(delta) - tau * math.log1p(-delta / 2)
        return math.exp(log_phi)
    return (1 - delta) / (delta * delta * _shrink_power(delta, tau))


def factor(delta: Number, tau: int, regime: ConvergenceRegime = ConvergenceRegime.STANDARD) -> Number:
    if regime == ConvergenceRegime.HIGH_HETEROGENEITY:
        return phi_prime(delta, tau)
    return phi(delta, tau)


def tau_range(p: TimingParams) -> range:
    """Integer staleness values DeCo enumerates: [ceil(b/T), ceil((b + S_g/a)/T)]"""
    low = math.ceil(p.b / p.t_comp)
    high = math.ceil((p.b + p.full_transmit) / p.t_comp)
    return range(low, high + 1)


def deco_plan(
    s_g: Number,
    a: Number,
    b: Number,
    t_comp: Number,
    regime: ConvergenceRegime = ConvergenceRegime.STANDARD,
    d: Optional[int] = None,
) -> Plan:
    """
    Minimize the regime's factor over τ with δ = δ*(τ)

    Ties go to the smaller τ. ``d`` sets δ_floor = 1/d.
    """
    try:
        p = TimingParams(t_comp=t_comp, s_g=s_g, a=a, b=b)
    except ValueError as e:
        raise PlannerError(str(e)) from e

    # Uncompressed D-SGD is already bubble-free
    if p.t_comp + p.b + p.full_transmit <= p.t_comp * (1 + settings.saturation_tol):
        one = p.t_comp / p.t_comp
        return Plan(tau=0, delta=one, phi=one * 0)

    floor = as_like(delta_floor(d), p.t_comp)
    best: Optional[Plan] = None
    for tau in tau_range(p):
        delta = delta_star(tau, p, d)
        value = factor(delta, tau, regime)
        if best is None or value < best.phi:
            best = Plan(tau=tau, delta=delta, phi=value, clamped=(delta == floor))

    if best.clamped:
        logger.warning(
            f"DeCo plan clamped to delta floor {float(floor):.3g} "
            f"(a={float(a):.4g} bps, b={float(b):.4g} s, T_comp={float(t_comp):.4g} s)"
        )
    return best


def brute_force_plan(
    p: TimingParams,
    tau_max: int,
    delta_grid: Iterable[Number],
    regime: ConvergenceRegime = ConvergenceRegime.STANDARD,
    tol: Optional[float] = None,
) -> Union[Plan, InfeasiblePlan]:
    """Exhaustive oracle over τ in [0, tau_max] and the δ grid, subject to T_avg <= T_comp·(1 + tol)"""
    tol = settings.saturation_tol if tol is None else tol
    grid = sorted(set(delta_grid))
    limit = p.t_comp * (1 + tol)

    best: Optional[Plan] = None
    for tau in range(tau_max + 1):
        for delta in grid:
            if t_avg_closed_form(p, delta, tau) > limit:
                continue
            value = factor(delta, tau, regime)
            if best is None or value < best.phi:
                best = Plan(tau=tau, delta=delta, phi=value)

    if best is None:
        return InfeasiblePlan(reason=f"no (tau <= {tau_max}, delta in grid) pair is bubble-free")
    return best


def describe_plan(p: TimingParams, plan: Plan) -> Dict[str, Union[int, float, bool]]:
    """Plan plus the timing figures the CLI and API report"""
    return {
        **plan.to_dict(),
        "t_avg": float(t_avg_closed_form(p, plan.delta, plan.tau)),
        "throughput_efficiency": float(throughput_efficiency(p, plan.delta, plan.tau)),
    }
