"""Smoothest extension of source outputs to the target block.

y_t*(v) = argmin_t R_n(v, t). For the Laplacian regularizer the target block
satisfies L_TT t = -L_TS v.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import linalg
from scipy.sparse.linalg import LinearOperator, cg

from models.graph import LaplacianGraph
from utils.exceptions import DisconnectedGraphError, NumericError, ValidationError

RESIDUAL_TOL = 1e-8


class ExtrapolationSolver(str, Enum):
    CLOSED_FORM = "ClosedForm"
    ITERATIVE = "Iterative"


@dataclass
class ExtrapolationResult:
    extended    : np.ndarray
    residual    : float               # ||L_TS v + L_TT t||
    solver      : ExtrapolationSolver
    jitter_used : float = 0.0


def _source_vector(graph: LaplacianGraph, source_outputs) -> np.ndarray:
    v = np.asarray(source_outputs, dtype=np.float64).reshape(-1)
    if v.shape[0] != graph.n_source:
        raise ValidationError(f"source outputs have length {v.shape[0]}, graph has {graph.n_source} source nodes")
    if not np.all(np.isfinite(v)):
        raise ValidationError("source outputs must be finite")
    if graph.n_target == 0:
        raise ValidationError("graph has no target nodes to extend to")
    return v


def _residual(graph: LaplacianGraph, v: np.ndarray, t: np.ndarray) -> float:
    return float(np.linalg.norm(graph.L_TS @ v + graph.L_TT @ t))


def extrapolate_closed_form(graph: LaplacianGraph, source_outputs) -> ExtrapolationResult:
    v = _source_vector(graph, source_outputs)
    if graph.disconnected:
        raise DisconnectedGraphError(graph.mu_R)
    L_TT = graph.L_TT
    rhs = -graph.L_TS @ v
    jitter = 0.0
    try:
        t = linalg.cho_solve(linalg.cho_factor(L_TT), rhs)
    except linalg.LinAlgError:
        jitter = 1e-12 * float(np.trace(L_TT)) / graph.n_target
        try:
            t = linalg.cho_solve(linalg.cho_factor(L_TT + jitter * np.eye(graph.n_target)), rhs)
        except linalg.LinAlgError as err:
            raise NumericError("extrapolation", f"Cholesky failed even with jitter {jitter:.3e}: {err}")
    residual = _residual(graph, v, t)
    if residual > RESIDUAL_TOL * (1.0 + np.linalg.norm(v)):
        raise NumericError("extrapolation", f"residual {residual:.3e} above tolerance (mu_R = {graph.mu_R:.3e})")
    return ExtrapolationResult(t, residual, ExtrapolationSolver.CLOSED_FORM, jitter)


def extrapolate_iterative(graph: LaplacianGraph, source_outputs, max_iter: int = 10_000) -> ExtrapolationResult:
    """Conjugate gradients on the target block of R_n(v, .)."""
    v = _source_vector(graph, source_outputs)
    if graph.disconnected:
        raise DisconnectedGraphError(graph.mu_R)
    L_TT = graph.L_TT
    rhs = -graph.L_TS @ v
    operator = LinearOperator(L_TT.shape, matvec=lambda x: L_TT @ x, dtype=np.float64)
    atol = 1e-2 * RESIDUAL_TOL * (1.0 + np.linalg.norm(v))
    t, info = cg(operator, rhs, x0=np.zeros(graph.n_target), rtol=0.0, atol=atol, maxiter=max_iter)
    if info != 0:
        raise NumericError("extrapolation", f"conjugate gradients stopped after {max_iter} iterations (info={info})")
    return ExtrapolationResult(t, _residual(graph, v, t), ExtrapolationSolver.ITERATIVE)
