"""
Synthetic distributed objectives with per-worker gradient oracles

quadratic: f_i(x) = ½ (x - c_i)ᵀ A_i (x - c_i), A_i symmetric with spectrum in
           [mu, smoothness], centers c_i = zeta · N(0, I)
logistic:  l2-regularized logistic regression, worker i's class means shifted
           by zeta · N(0, I)

f = (1/n) Σ f_i throughout.
"""
import logging
from fractions import Fraction
from typing import Optional

import numpy as np

from app.models.experiment_models import TaskKind, TaskSpec

logger = logging.getLogger(__name__)

# SeedSequence spawn keys, kept apart so task data never shares a stream with noise
TASK_STREAM = 0
INIT_STREAM = 1
WORKER_STREAM = 2


def to_exact(values: np.ndarray) -> np.ndarray:
    """Exact rational copy of a float array (object dtype of Fraction)"""
    flat = [Fraction(float(v)) for v in np.asarray(values, dtype=np.float64).ravel()]
    return np.array(flat, dtype=object).reshape(np.shape(values))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _random_rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


class SyntheticTask:
    """Base class: subclasses supply loss, per-worker gradient and the optimum"""

    def __init__(self, spec: TaskSpec):
        self.spec = spec
        self.d = spec.d
        self.n = spec.n
        self.exact = False

    @property
    def smoothness(self) -> float:
        raise NotImplementedError

    @property
    def strong_convexity(self) -> float:
        raise NotImplementedError

    @property
    def f_star(self) -> float:
        raise NotImplementedError

    def loss(self, x: np.ndarray):
        raise NotImplementedError

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def local_gradient(self, x: np.ndarray, i: int) -> np.ndarray:
        raise NotImplementedError

    def initial_point(self, seed: Optional[int] = None) -> np.ndarray:
        seed = self.spec.seed if seed is None else seed
        rng = np.random.default_rng(np.random.SeedSequence([seed, INIT_STREAM]))
        x0 = self.spec.init_scale * rng.standard_normal(self.d)
        return to_exact(x0) if self.exact else x0

    def worker_rng(self, i: int, seed: Optional[int] = None) -> np.random.Generator:
        """Independent noise stream for worker i; draw t belongs to iteration t"""
        seed = self.spec.seed if seed is None else seed
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, WORKER_STREAM, i])))


class QuadraticTask(SyntheticTask):
    """Strongly convex quadratic with closed-form optimum"""

    def __init__(self, spec: TaskSpec):
        super().__init__(spec)
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, TASK_STREAM]))
        d, n = spec.d, spec.n

        matrices = []
        for _ in range(n):
            eigenvalues = rng.uniform(spec.mu, spec.smoothness, size=d)
            eigenvalues[0] = spec.mu
            eigenvalues[-1] = spec.smoothness
            q = _random_rotation(rng, d)
            a_i = (q * eigenvalues) @ q.T
            matrices.append(0.5 * (a_i + a_i.T))
        self.matrices = np.stack(matrices)
        self.centers = spec.zeta * rng.standard_normal((n, d))

        self._a_bar = self.matrices.mean(axis=0)
        self._b_bar = np.einsum("nij,nj->i", self.matrices, self.centers) / n
        self._const = 0.5 * float(np.einsum("ni,nij,nj->", self.centers, self.matrices, self.centers)) / n
        self.x_star = np.linalg.solve(self._a_bar, self._b_bar)
        self._f_star = self._loss_float(self.x_star)

    @property
    def smoothness(self) -> float:
        return self.spec.smoothness

    @property
    def strong_convexity(self) -> float:
        return self.spec.mu

    @property
    def f_star(self) -> float:
        return self._f_star

    def _loss_float(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self._a_bar @ x - self._b_bar @ x + self._const)

    def loss(self, x: np.ndarray):
        if self.exact:
            return Fraction(1, 2) * (x @ self._a_bar @ x) - self._b_bar @ x + self._const
        return self._loss_float(x)

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        return self._a_bar @ x - self._b_bar

    def local_gradient(self, x: np.ndarray, i: int) -> np.ndarray:
        return self.matrices[i] @ (x - self.centers[i])

    def as_exact(self) -> "QuadraticTask":
        """Same task with rational data, for exact-arithmetic runs"""
        exact = object.__new__(QuadraticTask)
        exact.spec = self.spec
        exact.d, exact.n = self.d, self.n
        exact.exact = True
        exact.matrices = to_exact(self.matrices)
        exact.centers = to_exact(self.centers)
        exact._a_bar = sum(exact.matrices[i] for i in range(self.n)) / self.n
        exact._b_bar = sum(exact.matrices[i] @ exact.centers[i] for i in range(self.n)) / self.n
        exact._const = sum(
            Fraction(1, 2) * (exact.centers[i] @ exact.matrices[i] @ exact.centers[i]) for i in range(self.n)
        ) / self.n
        exact.x_star = self.x_star
        exact._f_star = self._f_star
        return exact


class LogisticTask(SyntheticTask):
    """l2-regularized logistic regression over per-worker shifted datasets"""

    def __init__(self, spec: TaskSpec):
        super().__init__(spec)
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, TASK_STREAM]))
        d, n, m = spec.d, spec.n, spec.samples_per_worker

        base_mean = rng.standard_normal(d) / np.sqrt(d)
        features, labels = [], []
        for _ in range(n):
            shift = spec.zeta * rng.standard_normal(d) / np.sqrt(d)
            y = np.where(rng.uniform(size=m) < 0.5, -1.0, 1.0)
            x = y[:, None] * (base_mean + shift)[None, :] + rng.standard_normal((m, d))
            features.append(x)
            labels.append(y)
        self.features = np.stack(features)
        self.labels = np.stack(labels)
        self.reg = spec.mu

        per_worker = [np.linalg.norm(x, ord=2) ** 2 / (4.0 * m) for x in self.features]
        self._smoothness = float(max(per_worker)) + self.reg
        self.x_star = self._solve()
        self._f_star = self.loss(self.x_star)

    def _solve(self, iterations: int = 50) -> np.ndarray:
        """Newton's method on the (strongly convex) global objective"""
        w = np.zeros(self.d)
        n, m = self.n, self.spec.samples_per_worker
        for _ in range(iterations):
            hessian = self.reg * np.eye(self.d)
            for i in range(n):
                s = _sigmoid(self.labels[i] * (self.features[i] @ w))
                weights = s * (1.0 - s)
                hessian += (self.features[i].T * weights) @ self.features[i] / (m * n)
            step = np.linalg.solve(hessian, self.full_gradient(w))
            w = w - step
            if np.linalg.norm(step) < 1e-14:
                break
        return w

    @property
    def smoothness(self) -> float:
        return self._smoothness

    @property
    def strong_convexity(self) -> float:
        return self.reg

    @property
    def f_star(self) -> float:
        return self._f_star

    def loss(self, x: np.ndarray) -> float:
        total = 0.0
        for i in range(self.n):
            margins = self.labels[i] * (self.features[i] @ x)
            total += float(np.mean(np.logaddexp(0.0, -margins)))
        return total / self.n + 0.5 * self.reg * float(x @ x)

    def local_gradient(self, x: np.ndarray, i: int) -> np.ndarray:
        margins = self.labels[i] * (self.features[i] @ x)
        weights = -self.labels[i] * _sigmoid(-margins)
        return self.features[i].T @ weights / self.spec.samples_per_worker + self.reg * x

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        return sum(self.local_gradient(x, i) for i in range(self.n)) / self.n


def build_task(spec: TaskSpec, exact: bool = False) -> SyntheticTask:
    """Instantiate the task a spec describes"""
    if spec.kind == TaskKind.QUADRATIC:
        task = QuadraticTask(spec)
        return task.as_exact() if exact else task
    if exact:
        raise ValueError("exact arithmetic is only available for quadratic tasks")
    return LogisticTask(spec)


def worker_gradient(task: SyntheticTask, x: np.ndarray, i: int, rng: np.random.Generator) -> np.ndarray:
    """∇f_i(x) + ξ, ξ ~ N(0, σ²/d · I); draws nothing when σ = 0"""
    if not 0 <= i < task.n:
        raise IndexError(f"worker index {i} out of range for n={task.n}")
    grad = task.local_gradient(x, i)
    sigma = task.spec.sigma
    if sigma > 0:
        noise = rng.normal(0.0, sigma / np.sqrt(task.d), size=task.d)
        grad = grad + (to_exact(noise) if task.exact else noise)
    return grad
