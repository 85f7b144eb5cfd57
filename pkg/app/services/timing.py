"""
Compute/transmit/arrive pipeline model for delayed, compressed aggregation

All functions are generic over the scalar type: pass ``Fraction`` parameters to
get exact rational schedules, floats otherwise.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from app.core.config import settings

logger = logging.getLogger(__name__)

Number = Union[float, Fraction]


class TimingError(ValueError):
    """Invalid timing input"""


@dataclass(frozen=True)
class TimingParams:
    """The four scalars driving the pipeline model"""
    t_comp: Number  # seconds
    s_g: Number  # bits
    a: Number  # bits/second
    b: Number  # seconds

    def __post_init__(self):
        for name in ("t_comp", "s_g", "a", "b"):
            value = getattr(self, name)
            if not isinstance(value, Real) or not math.isfinite(value):
                raise TimingError(f"{name} must be a finite real, got {value!r}")
        if self.t_comp <= 0:
            raise TimingError(f"t_comp must be > 0, got {self.t_comp}")
        if self.s_g <= 0:
            raise TimingError(f"s_g must be > 0, got {self.s_g}")
        if self.a <= 0:
            raise TimingError(f"a must be > 0, got {self.a}")
        if self.b < 0:
            raise TimingError(f"b must be >= 0, got {self.b}")

    @property
    def full_transmit(self) -> Number:
        """S_g / a, seconds to send an uncompressed gradient"""
        return self.s_g / self.a

    def transmit_time(self, delta: Number) -> Number:
        """δ·S_g/a"""
        return delta * self.s_g / self.a

    def with_network(self, a: Number, b: Number) -> "TimingParams":
        return TimingParams(t_comp=self.t_comp, s_g=self.s_g, a=a, b=b)

    def to_dict(self) -> Dict[str, float]:
        return {"t_comp": float(self.t_comp), "s_g": float(self.s_g), "a": float(self.a), "b": float(self.b)}


@dataclass
class PipelineSchedule:
    """End times of computation (TS), transmission (TM) and communication (TC)"""
    ts: List[Number]
    tm: List[Number]
    tc: List[Number]

    @property
    def iterations(self) -> int:
        return len(self.ts) - 1

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "k": np.arange(len(self.ts)),
                "ts_s": [float(v) for v in self.ts],
                "tm_s": [float(v) for v in self.tm],
                "tc_s": [float(v) for v in self.tc],
            }
        )


def _check_schedule_args(tau: int, t: int) -> None:
    if not isinstance(tau, (int, np.integer)) or tau < 0:
        raise TimingError(f"tau must be a non-negative integer, got {tau!r}")
    if not isinstance(t, (int, np.integer)) or t < 1:
        raise TimingError(f"t must be an integer >= 1, got {t!r}")


def simulate_pipeline(p: TimingParams, delta: Number, tau: int, t: int) -> PipelineSchedule:
    """
    Event-exact recurrence

        TC_k = TM_k + b
        TS_{k+1} = T_comp + max{TC_{k-τ}, TS_k}
        TM_{k+1} = δ·S_g/a + max{TM_k, TS_{k+1}}

    with TS_0 = TM_0 = 0 and TC_k = 0 for k <= 0.
    """
    _check_schedule_args(tau, t)
    c = p.transmit_time(delta)
    zero = p.t_comp * 0
    ts = [zero] * (t + 1)
    tm = [zero] * (t + 1)
    tc = [zero] * (t + 1)

    for k in range(t):
        j = k - tau
        arrived = tc[j] if j > 0 else zero
        ts[k + 1] = p.t_comp + max(arrived, ts[k])
        tm[k + 1] = c + max(tm[k], ts[k + 1])
        tc[k + 1] = tm[k + 1] + p.b

    return PipelineSchedule(ts=ts, tm=tm, tc=tc)


def t_avg_closed_form(p: TimingParams, delta: Number, tau: int) -> Number:
    """Asymptotic average iteration time max{(T_comp + b + c)/(τ+1), c, T_comp}"""
    c = p.transmit_time(delta)
    return max((p.t_comp + p.b + c) / (tau + 1), c, p.t_comp)


def error_bound(p: TimingParams, delta: Number) -> Number:
    """Bound on |TC_t - t·T_avg|: b + min{T_comp, δ·S_g/a}"""
    return p.b + min(p.t_comp, p.transmit_time(delta))


def tau_threshold(p: TimingParams, delta: Number) -> Number:
    """Staleness past which communication is fully hidden"""
    c = p.transmit_time(delta)
    first = (c + p.b) / p.t_comp
    if c == 0:
        return first
    return min(first, (p.t_comp + p.b) / c)


def delta_floor(d: Optional[int] = None) -> Fraction:
    """Smallest ratio that still transmits one coordinate"""
    d = d or settings.default_model_dim
    return Fraction(1, d)


def as_like(value: Fraction, reference: Number) -> Number:
    """Cast an exact value to float unless the reference is itself exact"""
    return value if isinstance(reference, Fraction) else float(value)


def delta_star(tau: int, p: TimingParams, d: Optional[int] = None) -> Number:
    """Largest δ that keeps communication hidden behind computation at staleness τ"""
    floor = as_like(delta_floor(d), p.t_comp)
    raw = min((tau * p.t_comp - p.b) * p.a / p.s_g, p.t_comp * p.a / p.s_g, 1)
    if raw <= 0:
        return floor
    return max(raw, floor)


def throughput_efficiency(p: TimingParams, delta: Number, tau: int) -> Number:
    """T_comp / T_avg, in (0, 1]"""
    return p.t_comp / t_avg_closed_form(p, delta, tau)


def estimate_total_time(p: TimingParams, delta: Number, tau: int, iterations: int) -> Number:
    """T_sum = iterations · T_avg"""
    return iterations * t_avg_closed_form(p, delta, tau)


def summarize_schedule(
    schedule: PipelineSchedule, p: TimingParams, delta: Number, tau: int
) -> Dict[str, float]:
    """Compare the simulated schedule against the closed form"""
    t = schedule.iterations
    closed = t_avg_closed_form(p, delta, tau)
    tc_t = schedule.tc[t]
    return {
        "iterations": t,
        "tc_final_s": float(tc_t),
        "t_avg_empirical": float(tc_t / t),
        "t_avg_closed_form": float(closed),
        "abs_gap": float(abs(tc_t - t * closed)),
        "bound": float(error_bound(p, delta)),
        "tau_threshold": float(tau_threshold(p, delta)),
        "throughput_efficiency": float(throughput_efficiency(p, delta, tau)),
    }


def efficiency_grid(
    t_comp: float,
    s_g: float,
    bandwidths: Sequence[float],
    latencies: Sequence[float],
    delta: float,
    tau: int,
) -> pd.DataFrame:
    """Tidy bandwidth x latency table of throughput efficiency"""
    rows = []
    for a in bandwidths:
        for b in latencies:
            p = TimingParams(t_comp=t_comp, s_g=s_g, a=a, b=b)
            rows.append(
                {
                    "bandwidth_bps": float(a),
                    "latency_s": float(b),
                    "tau": tau,
                    "delta": float(delta),
                    "t_avg_s": float(t_avg_closed_form(p, delta, tau)),
                    "throughput_efficiency": float(throughput_efficiency(p, delta, tau)),
                }
            )
    return pd.DataFrame(rows)


@dataclass
class PipelineClock:
    """
    Incremental form of the recurrence for runs whose (a, b, δ, τ) change over time

    Over any stretch where the parameters stay fixed, ``tc`` matches
    ``simulate_pipeline`` exactly. ``now`` is TC of the last step, held
    non-decreasing across latency drops.
    """
    t_comp: Number
    s_g: Number
    ts: List[Number] = field(default_factory=list)
    tm: List[Number] = field(default_factory=list)
    tc: List[Number] = field(default_factory=list)
    now: Number = 0

    def __post_init__(self):
        zero = self.t_comp * 0
        self.ts = [zero]
        self.tm = [zero]
        self.tc = [zero]
        self.now = zero

    @property
    def k(self) -> int:
        return len(self.ts) - 1

    def step(self, a: Number, b: Number, delta: Number, tau: int) -> Number:
        """Advance one iteration and return the simulated clock"""
        k = self.k
        c = delta * self.s_g / a
        j = k - tau
        arrived = self.tc[j] if j > 0 else self.ts[0]
        ts_next = self.t_comp + max(arrived, self.ts[k])
        tm_next = c + max(self.tm[k], ts_next)
        self.ts.append(ts_next)
        self.tm.append(tm_next)
        self.tc.append(tm_next + b)
        self.now = max(self.now, tm_next + b)
        return self.now

    def summary(self) -> Dict[str, Any]:
        return {"iterations": self.k, "clock_s": float(self.now)}
