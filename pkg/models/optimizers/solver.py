"""Regularized least squares solvers.

Every model family is linear in its weights, so with the quadratic loss the
Laplacian-regularized objective is a quadratic form in w and is solved through
its normal equations.
"""
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

from datasets.base import Dataset
from models.__base import BaseModel, ModelSpec
from models.graph import LaplacianGraph
from models.losses.adversarial import AdversaryConfig, adversarial_regularizer
from models.losses.laplacian import laplacian_regularizer
from models.losses.quadratic import mean_risk
from utils.agent_utils import get_net
from utils.exceptions import NumericError, UnsupportedOperationError, ValidationError
from utils.seeding import child_seeds

STATIONARITY_TOL = 1e-8


@dataclass
class FitReport:
    train_loss        : float
    regularizer_value : float
    objective         : float
    iterations        : int
    converged         : bool
    gradient_norm     : float       = 0.0
    lam               : float       = 0.0
    trace             : List[float] = field(default_factory=list)
    start_values      : List[float] = field(default_factory=list)    # per outer iteration, before the w step

    def to_dict(self) -> dict:
        return asdict(self)


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not np.isfinite(lam) or lam < 0:
        raise ValidationError(f"lambda must be a finite value >= 0, got {lam}")
    return lam


def _solve(M: np.ndarray, rhs: np.ndarray, ridge: float) -> np.ndarray:
    A = M + ridge * np.eye(M.shape[0])
    A = 0.5 * (A + A.T)
    if ridge == 0.0:
        eig = linalg.eigvalsh(A)
        if eig[0] <= 1e-13 * max(abs(eig[-1]), 1.0):
            raise NumericError("solver", "normal matrix is singular at ridge = 0; set solver.model.ridge > 0")
    try:
        factor = linalg.cho_factor(A)
        return linalg.cho_solve(factor, rhs)
    except linalg.LinAlgError as err:
        raise NumericError("solver", f"normal equations could not be factored ({err}); increase ridge")


def _least_squares(design: np.ndarray, y: np.ndarray, ridge: float, sample_weight: Optional[np.ndarray] = None) -> np.ndarray:
    if sample_weight is not None:
        root = np.sqrt(sample_weight)
        design, y = design * root[:, None], y * root
    if ridge == 0.0:
        try:
            w, *_ = linalg.lstsq(design, y)
        except linalg.LinAlgError as err:
            raise NumericError("solver", f"least squares failed: {err}")
        return w
    n = design.shape[0]
    return _solve(design.T @ design / n, design.T @ y / n, ridge)


def _erm_report(model: BaseModel, design: np.ndarray, y: np.ndarray) -> FitReport:
    w = model.get_weights()
    residual = design @ w - y
    gradient = design.T @ residual / max(len(y), 1)
    grad_norm = float(np.linalg.norm(gradient))
    train = mean_risk(design @ w, y)
    return FitReport(train, 0.0, train, 1, grad_norm <= STATIONARITY_TOL * (1 + np.linalg.norm(y)), grad_norm, 0.0)


def fit_erm(source: Dataset, spec: ModelSpec) -> Tuple[BaseModel, FitReport]:
    """Least squares fit on the labeled source sample."""
    y = source.training_labels()
    model = get_net(spec, source.p, anchors=source.features)
    design = model.design_matrix(source.features)
    model.set_weights(_least_squares(design, y, spec.ridge))
    return model, _erm_report(model, design, y)


def fit_importance_weighted(source: Dataset, spec: ModelSpec, weights: np.ndarray,
                            clip: Optional[float] = None) -> Tuple[BaseModel, FitReport]:
    """ERM with per-sample weights w(x) = dQ/dP(x), optionally clipped."""
    y = source.training_labels()
    weights = np.asarray(weights, dtype=np.float64).reshape(-1)
    if weights.shape[0] != source.n or np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ValidationError("importance weights must be finite, nonnegative and one per source row")
    if clip is not None:
        weights = np.minimum(weights, clip)
    if weights.sum() == 0:
        raise NumericError("solver", "all importance weights are zero")
    weights = weights * (len(weights) / weights.sum())
    model = get_net(spec, source.p, anchors=source.features)
    design = model.design_matrix(source.features)
    model.set_weights(_least_squares(design, y, spec.ridge, weights))
    report = _erm_report(model, design, y)
    return model, report


def fit_regularized(source: Dataset, target_features: Dataset, spec: ModelSpec, graph: LaplacianGraph,
                    lam: float) -> Tuple[BaseModel, FitReport]:
    """argmin_w (1/n_s) sum 1/2 (f(x_i) - y_i)^2 + lam * f(X)' L f(X) / n^2, target labels never read."""
    lam = _check_lambda(lam)
    if graph.n_source != source.n or graph.n_target != target_features.n:
        raise ValidationError(
            f"graph was built on {graph.n_source}+{graph.n_target} points, got {source.n}+{target_features.n}"
        )
    y = source.training_labels()
    X_all = np.vstack([source.features, target_features.features])
    model = get_net(spec, source.p, anchors=X_all)
    design_s = model.design_matrix(source.features)
    design = model.design_matrix(X_all)
    n_s, n = source.n, graph.n

    rhs = design_s.T @ y / n_s
    M = design_s.T @ design_s / n_s + (2.0 * lam / n ** 2) * design.T @ graph.laplacian @ design
    if lam == 0.0:
        w = _least_squares(design_s, y, spec.ridge)
    else:
        w = _solve(M, rhs, spec.ridge)
    model.set_weights(w)

    outputs = design @ w
    train = mean_risk(design_s @ w, y)
    reg = laplacian_regularizer(graph, outputs).value
    grad_norm = float(np.linalg.norm(M @ w - rhs))
    converged = grad_norm <= STATIONARITY_TOL * (1.0 + np.linalg.norm(y))
    return model, FitReport(train, reg, train + lam * reg, 1, converged, grad_norm, lam)


def fit_adversarial(source: Dataset, spec: ModelSpec, cfg: AdversaryConfig, lam: float) -> Tuple[BaseModel, FitReport]:
    """Alternate: adversarial displacements for the current model, then a step-halved move in w."""
    lam = _check_lambda(lam)
    cfg.validate()
    y = source.training_labels()
    X = source.features
    n = source.n

    model, _ = fit_erm(source, spec)
    if cfg.budget > 0 and not model.differentiable:
        raise UnsupportedOperationError(f"{spec.family}/{spec.feature_map} is not differentiable")
    design = model.design_matrix(X)
    w = model.get_weights()

    def objective(weights, gap):
        return mean_risk(design @ weights, y) + lam * float(np.mean((gap @ weights) ** 2))

    trace: List[float] = []
    start_values: List[float] = []
    seeds = child_seeds(cfg.seed, cfg.outer_steps)
    gap = np.zeros_like(design)
    for it in range(cfg.outer_steps):
        model.set_weights(w)
        _, delta = adversarial_regularizer(model, model, source, replace(cfg, seed=seeds[it]))
        gap = design - model.design_matrix(X + delta)
        before = objective(w, gap)
        # exact minimizer of the quadratic in w for this displacement field
        M = design.T @ design / n + (2.0 * lam / n) * gap.T @ gap
        direction = _solve(M, design.T @ y / n, spec.ridge) - w
        step, after = 1.0, before
        for _ in range(30):
            candidate = w + step * direction
            value = objective(candidate, gap)
            if value <= before + 1e-12 * (1.0 + abs(before)):
                w, after = candidate, value
                break
            step *= 0.5
        if not np.isfinite(after):
            raise NumericError("solver", f"adversarial objective diverged at outer iteration {it}; trace {trace}")
        trace.append(after)
        start_values.append(before)

    model.set_weights(w)
    train = mean_risk(design @ w, y)
    reg = float(np.mean((gap @ w) ** 2))
    tail = np.asarray(trace[-11:])
    changes = np.abs(np.diff(tail)) / np.maximum(np.abs(tail[:-1]), 1e-300)
    converged = bool(len(trace) >= 11 and np.all(changes < 1e-6))
    return model, FitReport(train, reg, train + lam * reg, len(trace), converged, 0.0, lam, trace, start_values)
