"""
Delayed, compressed, error-feedback SGD on synthetic tasks

One global iteration t (0-based inside the loop, 1-based in records):
  1. every worker i computes g_t^i at x_t, in worker order
  2. EF variants compress e_t^i + g_t^i with the δ active now; others send g_t^i
  3. the mean update U_t is queued to land at iteration t + τ_t
  4. x_{t+1} = x_t - γ · (sum of updates landing at t, in compute order)

Nothing lands while t < τ (warm-up). Updates already in flight keep their
landing iteration when a re-plan changes τ.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from app.models.experiment_models import AlgoVariant, RunRecord
from app.services.compressor import CompressionError, ErrorState, ef_compress, validate_ratio
from app.services.network import NetworkTrace, sample_at
from app.services.planner import ConvergenceRegime, deco_plan, phi
from app.services.synthetic_tasks import SyntheticTask, worker_gradient
from app.services.timing import PipelineClock

logger = logging.getLogger(__name__)

Number = Union[float, Fraction]


class TrainingError(ValueError):
    """Invalid training setup or failed run"""


class DivergenceError(TrainingError):
    """Loss stopped being finite"""

    def __init__(self, iteration: int, message: str):
        super().__init__(f"Run diverged at iteration {iteration}: {message}")
        self.iteration = iteration


def stepsize_advisory(
    smoothness: float, delta: Number, tau: int, strongly_convex: bool = True
) -> float:
    """
    Largest stepsize the convergence bounds allow for (δ, τ)

    smooth:          min{1/(4L), 1/(4L√τ), 1/(4L√(φ/δ))}
    strongly convex: min{1/(4L), 1/(8L√τ), 1/(16L√φ)}

    Terms with τ = 0 or φ = 0 drop out.
    """
    L = float(smoothness)
    value = float(phi(delta, tau))
    bounds = [1.0 / (4 * L)]
    if strongly_convex:
        if tau > 0:
            bounds.append(1.0 / (8 * L * math.sqrt(tau)))
        if value > 0:
            bounds.append(1.0 / (16 * L * math.sqrt(value)))
    else:
        if tau > 0:
            bounds.append(1.0 / (4 * L * math.sqrt(tau)))
        if value > 0:
            bounds.append(1.0 / (4 * L * math.sqrt(value / float(delta))))
    return min(bounds)


@dataclass
class WorkerState:
    error: ErrorState
    rng: np.random.Generator
    stream_id: int


@dataclass
class PendingUpdate:
    computed_at: int
    lands_at: int
    update: np.ndarray


class DelaySlot:
    """Aggregated updates in flight, ordered by compute iteration"""

    def __init__(self):
        self._pending: List[PendingUpdate] = []

    def push(self, computed_at: int, lands_at: int, update: np.ndarray) -> None:
        self._pending.append(PendingUpdate(computed_at, lands_at, update))

    def pop_landing(self, t: int) -> List[PendingUpdate]:
        landing = [p for p in self._pending if p.lands_at == t]
        self._pending = [p for p in self._pending if p.lands_at != t]
        return landing

    @property
    def pending(self) -> List[PendingUpdate]:
        return list(self._pending)

    def __len__(self) -> int:
        return len(self._pending)


@dataclass
class ProbeHistory:
    """Per-iteration worker sums kept for the virtual-sequence probe"""
    error_sums: List[np.ndarray] = field(default_factory=list)  # Σ_i e_s^i, s = 0..t
    grad_sums: List[np.ndarray] = field(default_factory=list)  # Σ_i g_s^i, s = 0..t-1
    taus: List[int] = field(default_factory=list)
    x_hat: List[np.ndarray] = field(default_factory=list)

    @property
    def constant_tau(self) -> bool:
        return len(set(self.taus)) <= 1


@dataclass
class NVSProbe:
    """Noise terms and virtual iterates at one iteration"""
    b: np.ndarray
    b_tilde: np.ndarray
    x_tilde: np.ndarray
    x_hat: np.ndarray
    residual: float


@dataclass
class TrainerState:
    task: SyntheticTask
    gamma: Number
    x: np.ndarray
    workers: List[WorkerState]
    slot: DelaySlot
    tau: int
    delta: Number
    t: int = 0
    history: Optional[ProbeHistory] = None
    last_grad_sum: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return len(self.workers)


def init_state(
    task: SyntheticTask,
    gamma: Number,
    tau: int,
    delta: Number,
    seed: Optional[int] = None,
    probe: bool = False,
) -> TrainerState:
    if gamma <= 0:
        raise TrainingError(f"gamma must be > 0, got {gamma}")
    if tau < 0:
        raise TrainingError(f"tau must be >= 0, got {tau}")
    if task.exact:
        gamma = Fraction(gamma)
    workers = [
        WorkerState(error=ErrorState.zeros(task.d, exact=task.exact), rng=task.worker_rng(i, seed), stream_id=i)
        for i in range(task.n)
    ]
    state = TrainerState(
        task=task,
        gamma=gamma,
        x=task.initial_point(seed),
        workers=workers,
        slot=DelaySlot(),
        tau=tau,
        delta=delta,
    )
    if probe:
        state.history = ProbeHistory(error_sums=[_worker_sum([w.error.residual for w in workers])])
        state.history.x_hat.append(_virtual_point(state)[3])
    return state


def _worker_sum(vectors: List[np.ndarray]) -> np.ndarray:
    """Fixed-order sum starting from the first worker's vector"""
    total = vectors[0]
    for v in vectors[1:]:
        total = total + v
    return total


def _check_variant(variant: AlgoVariant, tau: int, delta: Number) -> None:
    if variant in (AlgoVariant.D_SGD, AlgoVariant.D_EF_SGD) and tau != 0:
        raise TrainingError(f"{variant.value} runs without delay, got tau={tau}")
    if variant in (AlgoVariant.D_SGD, AlgoVariant.DD_SGD) and delta != 1:
        raise TrainingError(f"{variant.value} sends full gradients, got delta={delta}")


def step(variant: AlgoVariant, state: TrainerState) -> TrainerState:
    """Advance one global iteration in place and return the state"""
    _check_variant(variant, state.tau, state.delta)
    task, t = state.task, state.t

    grads, updates = [], []
    for worker in state.workers:
        g = worker_gradient(task, state.x, worker.stream_id, worker.rng)
        grads.append(g)
        if variant.uses_error_feedback:
            update, worker.error = ef_compress(g, worker.error, state.delta)
        else:
            update = g
        updates.append(update)

    aggregated = _worker_sum(updates) / state.n
    state.slot.push(computed_at=t, lands_at=t + state.tau, update=aggregated)
    state.last_grad_sum = _worker_sum(grads)

    landing = state.slot.pop_landing(t)
    if landing:
        applied = _worker_sum([p.update for p in landing])
        state.x = state.x - state.gamma * applied
    state.t = t + 1

    if state.history is not None:
        history = state.history
        history.grad_sums.append(state.last_grad_sum)
        history.taus.append(state.tau)
        history.error_sums.append(_worker_sum([w.error.residual for w in state.workers]))
        history.x_hat.append(_virtual_point(state)[3])
    return state


def _virtual_point(state: TrainerState) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    (B, B̃, x̃, x̂) at the current iterate

    With τ unchanged over the run:
        B_t = (γ/n) Σ_i e^i_{t-τ},  B̃_t = (γ/n) Σ_i Σ_{j=1..τ} g^i_{t-j}
    Otherwise the in-flight form, equal to the above whenever τ is constant:
        B_t = (γ/n) Σ_i e^i_t,      B̃_t = γ · Σ(updates in flight)
    x̃_t = x_t - B_t and x̂_t = x_t - B_t - B̃_t.
    """
    history, t, gamma, n = state.history, state.t, state.gamma, state.n
    zero = state.x * 0
    if history.constant_tau:
        tau = history.taus[0] if history.taus else state.tau
        b = gamma * history.error_sums[t - tau] / n if t - tau >= 0 else zero
        recent = [history.grad_sums[t - j] for j in range(1, tau + 1) if t - j >= 0]
        b_tilde = gamma * _worker_sum(recent) / n if recent else zero
    else:
        b = gamma * history.error_sums[t] / n
        in_flight = [p.update for p in state.slot.pending]
        b_tilde = gamma * _worker_sum(in_flight) if in_flight else zero
    x_tilde = state.x - b
    return b, b_tilde, x_tilde, x_tilde - b_tilde


def _norm(v: np.ndarray, exact: bool) -> float:
    if exact:
        squared = sum(v * v)
        return 0.0 if squared == 0 else math.sqrt(float(squared))
    return float(np.linalg.norm(v))


def nvs_probe(state: TrainerState) -> NVSProbe:
    """
    Virtual-sequence check for the last completed iteration t

    residual = ‖x̂_{t+1} - (x̂_t - (γ/n) Σ_i g_t^i)‖ / max(1, ‖x̂_t‖),
    zero in exact arithmetic.
    """
    if state.history is None:
        raise TrainingError("Probe mode is not enabled for this run")
    if state.t == 0:
        raise TrainingError("Probe needs at least one completed iteration")
    history = state.history
    x_hat_prev, x_hat_next = history.x_hat[-2], history.x_hat[-1]
    expected = x_hat_prev - state.gamma * history.grad_sums[-1] / state.n
    exact = state.task.exact
    residual = _norm(x_hat_next - expected, exact) / max(1.0, _norm(x_hat_prev, exact))
    b, b_tilde, x_tilde, x_hat = _virtual_point(state)
    return NVSProbe(b=b, b_tilde=b_tilde, x_tilde=x_tilde, x_hat=x_hat, residual=residual)


@dataclass(frozen=True)
class FixedPlan:
    """Same (τ, δ) for the whole run"""
    tau: int
    delta: Number

    def due(self, t: int) -> bool:
        return t == 1


@dataclass(frozen=True)
class AdaptivePlan:
    """
    DeCo re-planned at t = 1, 1 + E, 1 + 2E, ... from the trace at the current clock

    ``every=None`` plans once at t = 1 (E = ∞).
    """
    trace: NetworkTrace
    every: Optional[int] = None
    regime: ConvergenceRegime = ConvergenceRegime.STANDARD

    def due(self, t: int) -> bool:
        if self.every is None:
            return t == 1
        return (t - 1) % self.every == 0


PlanSource = Union[FixedPlan, AdaptivePlan]


def _resolve_plan(
    source: PlanSource, t_comp: float, s_g: float, now: float, d: int
) -> Tuple[int, Number]:
    if isinstance(source, FixedPlan):
        return source.tau, source.delta
    sample = sample_at(source.trace, float(now))
    plan = deco_plan(s_g, sample.bandwidth, sample.latency, t_comp, regime=source.regime, d=d)
    return plan.tau, plan.delta


def train_run(
    task: SyntheticTask,
    variant: AlgoVariant,
    plan_source: PlanSource,
    gamma: Number,
    iterations: int,
    t_comp: float,
    s_g: float,
    trace: NetworkTrace,
    probe: bool = False,
    seed: Optional[int] = None,
    target_gap: Optional[float] = None,
) -> List[RunRecord]:
    """
    Run up to ``iterations`` global iterations and return one record per iteration

    The simulated clock advances with the pipeline recurrence, sampling the
    trace at the current clock every iteration; the plan changes only when the
    plan source is due. Past the end of the trace the last sample holds.
    """
    if iterations < 1:
        raise TrainingError(f"iterations must be >= 1, got {iterations}")
    if variant.is_deco != isinstance(plan_source, AdaptivePlan):
        raise TrainingError(f"{variant.value} does not take a {type(plan_source).__name__}")

    clock = PipelineClock(t_comp=t_comp, s_g=s_g)
    tau, delta = _resolve_plan(plan_source, t_comp, s_g, clock.now, task.d)
    _check_variant(variant, tau, delta)
    validate_ratio(delta)
    state = init_state(task, gamma, tau, delta, seed=seed, probe=probe)

    advisory = stepsize_advisory(task.smoothness, delta, tau)
    logger.info(
        f"Starting {variant.value} run: n={task.n}, d={task.d}, gamma={float(gamma):.4g}, "
        f"tau={tau}, delta={float(delta):.4g}, iterations={iterations} (advisory gamma <= {advisory:.4g})"
    )
    if float(gamma) > advisory:
        logger.info(f"gamma {float(gamma):.4g} exceeds the advisory bound {advisory:.4g}")

    f_star = task.f_star
    records: List[RunRecord] = []
    for t in range(1, iterations + 1):
        if t > 1 and plan_source.due(t):
            new_tau, new_delta = _resolve_plan(plan_source, t_comp, s_g, clock.now, task.d)
            if (new_tau, new_delta) != (state.tau, state.delta):
                logger.info(
                    f"Re-plan at iteration {t} (clock {float(clock.now):.3f} s): "
                    f"tau {state.tau} -> {new_tau}, delta {float(state.delta):.4g} -> {float(new_delta):.4g}, "
                    f"advisory gamma <= {stepsize_advisory(task.smoothness, new_delta, new_tau):.4g}"
                )
            state.tau, state.delta = new_tau, new_delta

        sample = sample_at(trace, float(clock.now))
        try:
            step(variant, state)
        except CompressionError as e:
            raise DivergenceError(t, str(e)) from e
        now = clock.step(sample.bandwidth, sample.latency, state.delta, state.tau)

        loss = float(task.loss(state.x))
        if not math.isfinite(loss):
            raise DivergenceError(t, f"loss is {loss}")
        grad = task.full_gradient(state.x)
        record = RunRecord(
            iteration=t,
            sim_time_s=float(now),
            loss=loss,
            grad_norm_sq=float(sum(grad * grad)) if task.exact else float(grad @ grad),
            tau=state.tau,
            delta=float(state.delta),
            nvs_residual=nvs_probe(state).residual if probe else None,
        )
        records.append(record)

        if target_gap is not None and loss - f_star <= target_gap:
            logger.info(f"Target gap {target_gap:g} reached at iteration {t} (clock {record.sim_time_s:.3f} s)")
            break

    logger.info(
        f"Finished {variant.value} run: {len(records)} iterations, "
        f"final loss {records[-1].loss:.6g}, simulated time {records[-1].sim_time_s:.3f} s"
    )
    return records


def plan_source_for(
    variant: AlgoVariant,
    tau: int,
    delta: float,
    replan_every: Optional[int],
    trace: NetworkTrace,
    regime: ConvergenceRegime = ConvergenceRegime.STANDARD,
) -> PlanSource:
    """Plan source implied by a variant; the fixed variants pin what they define"""
    if variant == AlgoVariant.D_SGD:
        return FixedPlan(tau=0, delta=1.0)
    if variant == AlgoVariant.D_EF_SGD:
        return FixedPlan(tau=0, delta=delta)
    if variant == AlgoVariant.DD_SGD:
        return FixedPlan(tau=tau, delta=1.0)
    if variant == AlgoVariant.DD_EF_SGD:
        return FixedPlan(tau=tau, delta=delta)
    if variant == AlgoVariant.DECO_STATIC:
        return AdaptivePlan(trace=trace, every=None, regime=regime)
    return AdaptivePlan(trace=trace, every=replan_every, regime=regime)


def records_summary(records: List[RunRecord], f_star: float, target_gap: Optional[float] = None) -> Dict[str, object]:
    """Final figures and, when a target is given, the first iteration reaching it"""
    last = records[-1]
    summary: Dict[str, object] = {
        "iterations": last.iteration,
        "final_loss": last.loss,
        "final_gap": last.loss - f_star,
        "sim_time_s": last.sim_time_s,
    }
    if target_gap is not None:
        hit = next((r for r in records if r.loss - f_star <= target_gap), None)
        summary["reached"] = hit is not None
        summary["iterations_to_target"] = hit.iteration if hit else None
        summary["time_to_target_s"] = hit.sim_time_s if hit else None
    return summary
