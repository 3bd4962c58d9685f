from dataclasses import dataclass, replace
from typing import Callable, List, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
from simple_parsing.helpers import Serializable, choice

from datasets.base import Dataset
from datasets.regression import RegressionFunction
from models.losses.laplacian import RegularizerValue
from utils.exceptions import ConfigError, UnsupportedOperationError, ValidationError
from utils.seeding import make_rng


@dataclass
class AdversaryConfig(Serializable):
    """Transport adversary with mean displacement budget E||X - T(X)|| <= budget."""

    budget         : float = 0.1
    steps          : int   = 50      # inner ascent iterations
    step_size      : float = 0.1
    penalty_weight : float = 10.0    # weight of the budget penalty when projection = "penalty"
    projection     : str   = choice("radial", "penalty", default="radial")
    outer_steps    : int   = 30      # alternating iterations of fit_adversarial
    seed           : int   = 0

    def validate(self, path: str = "adversary") -> None:
        if not np.isfinite(self.budget) or self.budget < 0:
            raise ConfigError(f"{path}.budget", f"must be a finite value >= 0, got {self.budget}")
        if self.steps < 1:
            raise ConfigError(f"{path}.steps", "must be >= 1")
        if self.outer_steps < 1:
            raise ConfigError(f"{path}.outer_steps", "must be >= 1")
        if not self.step_size > 0:
            raise ConfigError(f"{path}.step_size", "must be > 0")
        if not self.penalty_weight > 0:
            raise ConfigError(f"{path}.penalty_weight", "must be > 0")
        if self.projection not in ("radial", "penalty"):
            raise ConfigError(f"{path}.projection", f"unknown projection {self.projection!r}")


def as_torch_fn(fn) -> Callable[[torch.Tensor], torch.Tensor]:
    if isinstance(fn, RegressionFunction):
        if not fn.is_differentiable:
            raise UnsupportedOperationError(f"oracle {fn.kind!r} is not differentiable")
        return fn.torch_forward
    if isinstance(fn, nn.Module):
        if not getattr(fn, "differentiable", True):
            raise UnsupportedOperationError(f"model family {type(fn).__name__} is not differentiable")
        return fn
    raise UnsupportedOperationError(f"cannot differentiate through {type(fn).__name__}")


def evaluate(fn, X: np.ndarray) -> np.ndarray:
    if hasattr(fn, "predict"):
        return fn.predict(X)
    return np.asarray(fn(X), dtype=np.float64)


def mean_norm(delta) -> float:
    if isinstance(delta, torch.Tensor):
        return delta.norm(dim=1).mean()
    return float(np.linalg.norm(delta, axis=1).mean()) if len(delta) else 0.0


def project_budget(delta: np.ndarray, budget: float) -> np.ndarray:
    """Uniform radial scaling onto {mean ||delta_i|| <= budget}."""
    current = mean_norm(delta)
    if current <= budget:
        return delta
    if budget == 0.0:
        return np.zeros_like(delta)
    return delta * (budget / current)


def random_displacements(rng: np.random.Generator, n: int, p: int, budget: float, concentrated: bool = False) -> np.ndarray:
    """A displacement field on the budget boundary: random directions, exponential or subset magnitudes."""
    directions = rng.normal(size=(n, p))
    directions /= np.maximum(np.linalg.norm(directions, axis=1, keepdims=True), 1e-300)
    if concentrated:
        magnitudes = np.zeros(n)
        chosen = rng.choice(n, size=max(1, n // 10), replace=False)
        magnitudes[chosen] = 1.0
    else:
        magnitudes = rng.exponential(size=n)
    delta = directions * magnitudes[:, None]
    scale = mean_norm(delta)
    return delta * (budget / scale) if scale > 0 else np.zeros((n, p))


class AdversarialObjective(nn.Module):
    """(1/n) sum_i (f(x_i) - g(x_i + delta_i))^2 as a function of the displacements."""

    def __init__(self, f_values: np.ndarray, g, features: np.ndarray) -> None:
        super().__init__()
        self.g = as_torch_fn(g)
        self.register_buffer("f_values", torch.as_tensor(np.asarray(f_values, dtype=np.float64)))
        self.register_buffer("x", torch.as_tensor(np.asarray(features, dtype=np.float64)))

    def forward(self, delta: torch.Tensor) -> torch.Tensor:
        return ((self.f_values - self.g(self.x + delta)) ** 2).mean()

    def value(self, delta: np.ndarray) -> float:
        with torch.no_grad():
            return float(self.forward(torch.as_tensor(delta)))

    def gradient(self, delta: np.ndarray) -> np.ndarray:
        d = torch.as_tensor(np.array(delta, dtype=np.float64)).requires_grad_(True)
        (grad,) = torch.autograd.grad(self.forward(d), d)
        return grad.numpy()


def transport_value(f, g, features: np.ndarray, delta: np.ndarray) -> float:
    """(1/n) sum (f(x_i) - g(x_i + delta_i))^2 for a fixed displacement field."""
    return float(np.mean((evaluate(f, features) - evaluate(g, features + delta)) ** 2))


def _ascend(objective: AdversarialObjective, delta: np.ndarray, cfg: AdversaryConfig) -> Tuple[float, np.ndarray]:
    """Projected gradient ascent from ``delta``; the starting point counts as seen."""
    n = delta.shape[0]
    best_delta, best_value = delta, objective.value(delta)
    for _ in range(cfg.steps):
        d = torch.as_tensor(delta).requires_grad_(True)
        target = objective(d)
        if cfg.projection == "penalty":
            target = target - cfg.penalty_weight * torch.relu(mean_norm(d) - cfg.budget) ** 2
        (grad,) = torch.autograd.grad(target, d)
        # step on each summand, not on the 1/n-scaled mean
        delta = project_budget(delta + cfg.step_size * n * grad.numpy(), cfg.budget)
        value = objective.value(delta)
        if not np.isfinite(value):
            break
        if value > best_value:
            best_delta, best_value = delta, value
    return best_value, best_delta


def adversarial_regularizer(f, g, source: Dataset, cfg: AdversaryConfig) -> Tuple[RegularizerValue, np.ndarray]:
    """Projected gradient ascent over per-sample displacements; returns the best value seen."""
    cfg.validate()
    X = source.features
    n, p = X.shape
    if cfg.budget == 0.0 or n == 0:
        delta = np.zeros((n, p))
        return RegularizerValue(transport_value(f, g, X, delta), flags={"zero_budget": True}), delta

    objective = AdversarialObjective(evaluate(f, X), g, X)
    best_value, best_delta = _ascend(objective, random_displacements(make_rng(cfg.seed), n, p, cfg.budget), cfg)
    return RegularizerValue(best_value, flags={"zero_budget": False}), best_delta


def adversarial_path(f, g, source: Dataset, cfg: AdversaryConfig, budgets: Sequence[float]) -> List[Tuple[RegularizerValue, np.ndarray]]:
    """Adversarial regularizer along a non-decreasing budget grid.

    Each budget runs one ascent from a fresh random field and one from the previous
    optimum, which stays feasible as the ball grows, and keeps the better of the two.
    The returned values are therefore non-decreasing in the budget.
    """
    budgets = [float(b) for b in budgets]
    if any(b1 < b0 for b0, b1 in zip(budgets, budgets[1:])):
        raise ValidationError(f"budgets must be non-decreasing, got {budgets}")
    X = source.features
    n, p = X.shape
    objective = None
    path: List[Tuple[RegularizerValue, np.ndarray]] = []
    previous = np.zeros((n, p))
    for i, budget in enumerate(budgets):
        step_cfg = replace(cfg, budget=budget)
        if budget == 0.0 or n == 0:
            value, delta = adversarial_regularizer(f, g, source, step_cfg)
            path.append((value, delta))
            previous = delta
            continue
        step_cfg.validate()
        if objective is None:
            objective = AdversarialObjective(evaluate(f, X), g, X)
        fresh = random_displacements(make_rng(cfg.seed + i), n, p, budget)
        best_value, best_delta = _ascend(objective, fresh, step_cfg)
        warm_value, warm_delta = _ascend(objective, previous, step_cfg)
        if warm_value >= best_value:
            best_value, best_delta = warm_value, warm_delta
        if path and best_value < path[-1][0].value:
            best_value, best_delta = path[-1][0].value, previous
        path.append((RegularizerValue(best_value, flags={"zero_budget": False}), best_delta))
        previous = best_delta
    return path
