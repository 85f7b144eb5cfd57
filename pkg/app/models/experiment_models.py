"""
Data models for experiments, runs and sweeps
"""
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.config import settings
from app.services.planner import ConvergenceRegime


class TaskKind(str, Enum):
    """Synthetic objective family"""
    QUADRATIC = "quadratic"
    LOGISTIC = "logistic"


class AlgoVariant(str, Enum):
    """Training algorithm; the first four fix (τ, δ) by definition"""
    D_SGD = "d-sgd"  # τ = 0, δ = 1
    D_EF_SGD = "d-ef-sgd"  # τ = 0
    DD_SGD = "dd-sgd"  # δ = 1
    DD_EF_SGD = "dd-ef-sgd"
    DECO_STATIC = "deco-static"  # DeCo once at t = 1
    DECO_ADAPTIVE = "deco-adaptive"  # DeCo every E iterations

    @property
    def uses_error_feedback(self) -> bool:
        return self not in (AlgoVariant.D_SGD, AlgoVariant.DD_SGD)

    @property
    def is_deco(self) -> bool:
        return self in (AlgoVariant.DECO_STATIC, AlgoVariant.DECO_ADAPTIVE)


class TaskSpec(BaseModel):
    """Synthetic distributed task"""
    model_config = ConfigDict(extra="forbid")

    kind: TaskKind = TaskKind.QUADRATIC
    d: int = Field(default=20, ge=1)  # model dimension
    n: int = Field(default=4, ge=1)  # workers
    zeta: float = Field(default=0.5, ge=0)  # heterogeneity knob
    sigma: float = Field(default=0.1, ge=0)  # gradient noise
    seed: int = 0
    mu: float = Field(default=1.0, gt=0)  # lower eigenvalue / l2 strength
    smoothness: float = Field(default=10.0, gt=0)  # upper eigenvalue L (quadratic)
    samples_per_worker: int = Field(default=64, ge=1)  # logistic only
    init_scale: float = Field(default=0.0, ge=0)  # x_0 ~ N(0, init_scale² I)

    @model_validator(mode="after")
    def _check_band(self) -> "TaskSpec":
        if self.kind == TaskKind.QUADRATIC and self.smoothness < self.mu:
            raise ValueError(f"smoothness ({self.smoothness}) must be >= mu ({self.mu})")
        return self


class ComputeProfile(BaseModel):
    """Per-iteration compute time and gradient size"""
    model_config = ConfigDict(extra="forbid")

    t_comp: float = Field(gt=0)  # seconds
    s_g: float = Field(gt=0)  # bits


class TraceGeneratorConfig(BaseModel):
    """Parameters for a generated fluctuating trace"""
    model_config = ConfigDict(extra="forbid")

    seed: int = 1
    mean_bandwidth: float = Field(gt=0)  # bits/s
    fluctuation_fraction: float = Field(default=0.0, ge=0, lt=1)
    latency: float = Field(ge=0)  # seconds
    duration: float = Field(default=3600.0, ge=0)
    interval: float = Field(default=10.0, gt=0)


class NetworkConfig(BaseModel):
    """Exactly one of trace_path, constant (bandwidth, latency) or generator"""
    model_config = ConfigDict(extra="forbid")

    trace_path: Optional[str] = None
    bandwidth: Optional[float] = Field(default=None, gt=0)
    latency: Optional[float] = Field(default=None, ge=0)
    generator: Optional[TraceGeneratorConfig] = None

    @model_validator(mode="after")
    def _one_source(self) -> "NetworkConfig":
        constant = self.bandwidth is not None or self.latency is not None
        if constant and (self.bandwidth is None or self.latency is None):
            raise ValueError("constant network needs both bandwidth and latency")
        sources = [self.trace_path is not None, constant, self.generator is not None]
        if sum(sources) != 1:
            raise ValueError("network needs exactly one of trace_path, bandwidth/latency, generator")
        return self


class ExperimentConfig(BaseModel):
    """Full, reproducible description of one training run"""
    model_config = ConfigDict(extra="forbid")

    schema_version: int = settings.config_schema_version
    seed: int = 0
    task: TaskSpec = TaskSpec()
    variant: AlgoVariant = AlgoVariant.DECO_ADAPTIVE
    gamma: float = Field(gt=0)
    iterations: int = Field(ge=1)
    tau: int = Field(default=0, ge=0)  # fixed-plan variants
    delta: float = Field(default=1.0, gt=0, le=1)  # fixed-plan variants
    replan_every: Optional[int] = Field(default=100, ge=1)  # None = never after t = 1
    regime: ConvergenceRegime = ConvergenceRegime.STANDARD
    compute: ComputeProfile
    network: NetworkConfig
    probe: bool = False
    exact: bool = False  # rational arithmetic, quadratic tasks only
    target_gap: Optional[float] = Field(default=None, gt=0)
    output_dir: str = settings.output_dir

    @field_validator("schema_version")
    @classmethod
    def _check_version(cls, value: int) -> int:
        if value != settings.config_schema_version:
            raise ValueError(
                f"unsupported schema_version {value}, expected {settings.config_schema_version}"
            )
        return value

    def hashable_dict(self) -> Dict[str, Any]:
        """Config content that defines the outputs (output location excluded)"""
        return self.model_dump(mode="json", exclude={"output_dir"})


class RunRecord(BaseModel):
    """One row of the run log"""
    iteration: int
    sim_time_s: float
    loss: float
    grad_norm_sq: float
    tau: int
    delta: float
    nvs_residual: Optional[float] = None


class SweepCell(BaseModel):
    """One configuration in a comparison grid; unset fields inherit from the base config"""
    model_config = ConfigDict(extra="forbid")

    name: str
    variant: AlgoVariant
    tau: Optional[int] = Field(default=None, ge=0)
    delta: Optional[float] = Field(default=None, gt=0, le=1)
    replan_every: Optional[int] = Field(default=None, ge=1)
    gamma: Optional[float] = Field(default=None, gt=0)
    n: Optional[int] = Field(default=None, ge=1)


class SweepGrid(BaseModel):
    """Exhaustive DD-EF-SGD grid: τ in [0, tau_max], δ on a log grid ending at 1"""
    model_config = ConfigDict(extra="forbid")

    tau_max: int = Field(default=8, ge=0)
    delta_points: int = Field(default=16, ge=1)
    delta_min: float = Field(default=0.01, gt=0, le=1)


class SweepConfig(BaseModel):
    """Comparison of several cells against one baseline"""
    model_config = ConfigDict(extra="forbid")

    schema_version: int = settings.config_schema_version
    base: ExperimentConfig
    cells: List[SweepCell] = []
    grid: Optional[SweepGrid] = None
    target_gap: float = Field(gt=0)
    baseline: str

    @field_validator("schema_version")
    @classmethod
    def _check_version(cls, value: int) -> int:
        if value != settings.config_schema_version:
            raise ValueError(
                f"unsupported schema_version {value}, expected {settings.config_schema_version}"
            )
        return value

    @model_validator(mode="after")
    def _check_cells(self) -> "SweepConfig":
        if not self.cells and self.grid is None:
            raise ValueError("sweep needs cells or a grid")
        names = [cell.name for cell in self.cells]
        if len(set(names)) != len(names):
            raise ValueError("cell names must be unique")
        if self.baseline not in names:
            raise ValueError(f"baseline '{self.baseline}' is not one of the cells")
        return self


class PlanRequest(BaseModel):
    """Inputs of a one-shot DeCo plan"""
    s_g: float = Field(gt=0)
    a: float = Field(gt=0)
    b: float = Field(ge=0)
    t_comp: float = Field(gt=0)
    regime: ConvergenceRegime = ConvergenceRegime.STANDARD
    d: int = Field(default=settings.default_model_dim, ge=1)


class TimingRequest(BaseModel):
    """Inputs of a pipeline simulation"""
    t_comp: float = Field(gt=0)
    s_g: float = Field(gt=0)
    a: float = Field(gt=0)
    b: float = Field(ge=0)
    delta: float = Field(gt=0, le=1)
    tau: int = Field(ge=0)
    t: int = Field(ge=1)


class EfficiencyRequest(BaseModel):
    """Bandwidth x latency throughput-efficiency grid"""
    t_comp: float = Field(gt=0)
    s_g: float = Field(gt=0)
    delta: float = Field(default=1.0, gt=0, le=1)
    tau: int = Field(default=0, ge=0)
    bandwidths: List[float] = Field(min_length=1)
    latencies: List[float] = Field(min_length=1)
