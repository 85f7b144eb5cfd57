"""
Bandwidth/latency traces: generation, CSV storage and step-hold sampling

Generated traces use a uniform multiplicative fluctuation around the mean
bandwidth. This is a stand-in model; real captures can be loaded from CSV.
"""
import bisect
import logging
import math
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["time_s", "bandwidth_bps", "latency_s"]

# numpy PCG64 (XSL-RR 128/64) seeded through SeedSequence; stream is stable across numpy releases
TRACE_PRNG = "numpy.PCG64/SeedSequence"


class TraceError(ValueError):
    """Invalid trace or generator input"""


class NetworkSample(BaseModel):
    """Network conditions from ``time`` onward"""
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    time: float = Field(ge=0)  # seconds
    bandwidth: float = Field(gt=0)  # bits/s
    latency: float = Field(ge=0)  # seconds


class NetworkTrace:
    """Immutable, time-ordered list of samples starting at t=0"""

    def __init__(self, samples: Sequence[NetworkSample]):
        samples = tuple(samples)
        if not samples:
            raise TraceError("Trace needs at least one sample")
        if samples[0].time != 0:
            raise TraceError(f"First sample must be at t=0, got {samples[0].time}")
        times = [s.time for s in samples]
        for earlier, later in zip(times, times[1:]):
            if later <= earlier:
                raise TraceError(f"Timestamps must be strictly increasing ({earlier} then {later})")
        self._samples = samples
        self._times = times

    @classmethod
    def constant(cls, bandwidth: float, latency: float) -> "NetworkTrace":
        return cls([NetworkSample(time=0.0, bandwidth=bandwidth, latency=latency)])

    @property
    def samples(self) -> tuple:
        return self._samples

    @property
    def times(self) -> List[float]:
        return self._times

    @property
    def duration(self) -> float:
        return self._times[-1]

    def __len__(self) -> int:
        return len(self._samples)

    def __eq__(self, other) -> bool:
        return isinstance(other, NetworkTrace) and self._samples == other._samples

    def __repr__(self) -> str:
        return f"NetworkTrace(samples={len(self)}, duration={self.duration}s)"

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "time_s": [s.time for s in self._samples],
                "bandwidth_bps": [s.bandwidth for s in self._samples],
                "latency_s": [s.latency for s in self._samples],
            },
            columns=TRACE_COLUMNS,
        )


def sample_at(trace: NetworkTrace, t: float) -> NetworkSample:
    """Sample with the greatest timestamp <= t; the last sample holds past the end"""
    if t < 0:
        raise TraceError(f"Query time must be >= 0, got {t}")
    index = bisect.bisect_right(trace.times, float(t)) - 1
    return trace.samples[index]


def gen_trace(
    seed: int,
    mean_bandwidth: float,
    fluctuation_fraction: float,
    latency: float,
    duration: float,
    interval: float,
) -> NetworkTrace:
    """
    Deterministic fluctuating-bandwidth trace

    bandwidth_i = mean·(1 + u_i), u_i ~ U[-f, +f], one sample every ``interval``
    seconds over [0, duration]; latency is constant.
    """
    if not (mean_bandwidth > 0 and math.isfinite(mean_bandwidth)):
        raise TraceError(f"mean_bandwidth must be > 0, got {mean_bandwidth}")
    if not (0 <= fluctuation_fraction < 1):
        raise TraceError(f"fluctuation_fraction must be in [0, 1), got {fluctuation_fraction}")
    if not (latency >= 0 and math.isfinite(latency)):
        raise TraceError(f"latency must be >= 0, got {latency}")
    if not (interval > 0 and duration >= 0):
        raise TraceError(f"need interval > 0 and duration >= 0, got {interval}, {duration}")

    count = int(math.floor(duration / interval)) + 1
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    u = rng.uniform(-fluctuation_fraction, fluctuation_fraction, size=count)

    samples = [
        NetworkSample(
            time=float(i * interval),
            bandwidth=float(mean_bandwidth * (1.0 + u[i])),
            latency=float(latency),
        )
        for i in range(count)
    ]
    logger.info(
        f"Generated trace: {count} samples, mean {mean_bandwidth:.4g} bps "
        f"±{fluctuation_fraction:.0%}, latency {latency} s, seed {seed}"
    )
    return NetworkTrace(samples)


def save_trace(trace: NetworkTrace, path: Union[str, Path]) -> Path:
    """Write trace CSV (header time_s,bandwidth_bps,latency_s)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trace.to_frame().to_csv(path, index=False, encoding="utf-8")
    logger.info(f"Trace saved: {path}")
    return path


def load_trace(path: Union[str, Path]) -> NetworkTrace:
    """Read a trace CSV written by ``save_trace`` or by hand"""
    path = Path(path)
    if not path.exists():
        raise TraceError(f"Trace file not found: {path}")
    try:
        frame = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise TraceError(f"Malformed trace file {path}: {e}") from e

    if list(frame.columns) != TRACE_COLUMNS:
        raise TraceError(f"Trace header must be {','.join(TRACE_COLUMNS)}, got {','.join(frame.columns)}")

    try:
        samples: List[NetworkSample] = [
            NetworkSample(time=float(row.time_s), bandwidth=float(row.bandwidth_bps), latency=float(row.latency_s))
            for row in frame.itertuples(index=False)
        ]
    except ValueError as e:
        raise TraceError(f"Invalid sample in {path}: {e}") from e
    return NetworkTrace(samples)
