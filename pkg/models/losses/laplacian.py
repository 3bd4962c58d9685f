from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from models.graph import LaplacianGraph
from utils.exceptions import ValidationError


@dataclass
class RegularizerValue:
    value          : float
    gradient       : Optional[np.ndarray] = None
    standard_error : Optional[float]      = None
    flags          : Dict[str, bool]      = field(default_factory=dict)

    def __post_init__(self):
        if not self.value >= -1e-12:
            raise ValidationError(f"regularizer value {self.value} is negative")


def _outputs(graph: LaplacianGraph, outputs) -> np.ndarray:
    f = np.asarray(outputs, dtype=np.float64).reshape(-1)
    if f.shape[0] != graph.n:
        raise ValidationError(f"outputs have length {f.shape[0]}, graph has {graph.n} nodes")
    return f


def laplacian_regularizer(graph: LaplacianGraph, outputs) -> RegularizerValue:
    """R_n(f) = f' L f / n^2 with gradient 2 L f / n^2."""
    f = _outputs(graph, outputs)
    Lf = graph.laplacian @ f
    n2 = float(graph.n) ** 2
    # f'Lf can dip below zero by rounding
    value = max(float(f @ Lf) / n2, 0.0)
    return RegularizerValue(value, 2.0 * Lf / n2, flags={"disconnected": graph.disconnected})


def pairwise_laplacian_regularizer(graph: LaplacianGraph, outputs) -> float:
    """Same quantity written as (1/n^2) sum_{i<j} K_ij (f_i - f_j)^2."""
    f = _outputs(graph, outputs)
    diff = f[:, None] - f[None, :]
    return float(0.5 * np.sum(graph.kernel_matrix * diff * diff)) / float(graph.n) ** 2


def split_regularizer(graph: LaplacianGraph, source_outputs, target_outputs) -> float:
    """R_n(v_s, v_t) for the stacked vector [v_s; v_t]."""
    v = np.concatenate([np.asarray(source_outputs, float).reshape(-1), np.asarray(target_outputs, float).reshape(-1)])
    return laplacian_regularizer(graph, v).value


def cross_domain_regularizer(graph: LaplacianGraph, outputs) -> float:
    """(1/(n_s n_t)) sum_{i in S, j in T} 1/2 K_ij (f_i - f_j)^2.

    The source-target block of R_n, a V-statistic for the population
    regularizer E[1/2 (f(X_s) - f(X_t))^2 K(X_s, X_t)]. The pooled R_n
    shares that limit only when the two laws coincide.
    """
    f = _outputs(graph, outputs)
    if graph.n_source == 0 or graph.n_target == 0:
        raise ValidationError("cross-domain regularizer needs source and target nodes")
    fs, ft = f[: graph.n_source], f[graph.n_source:]
    K = graph.kernel_matrix[: graph.n_source, graph.n_source:]
    return float(np.mean(0.5 * K * (fs[:, None] - ft[None, :]) ** 2))
