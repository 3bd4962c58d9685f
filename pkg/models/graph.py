from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from datasets.base import Dataset
from models.kernels import KernelSpec, gram_matrix
from utils.exceptions import NumericError, ValidationError

DISCONNECTED_TOL = 1e-12
EIG_RESIDUAL_TOL = 1e-8


def _extremal_eigpair(M: np.ndarray, which: str) -> Tuple[float, np.ndarray]:
    n = M.shape[0]
    index = 0 if which == "min" else n - 1
    try:
        values, vectors = linalg.eigh(M, subset_by_index=[index, index])
    except linalg.LinAlgError as err:
        raise NumericError("kernel_graph", f"symmetric eigensolver did not converge: {err}")
    value, vector = float(values[0]), vectors[:, 0]
    residual = np.linalg.norm(M @ vector - value * vector)
    scale = max(np.linalg.norm(M), 1.0)
    if residual > EIG_RESIDUAL_TOL * scale:
        raise NumericError("kernel_graph", f"eigenpair residual {residual:.3e} exceeds {EIG_RESIDUAL_TOL:.0e}*||L||")
    return value, vector


@dataclass(frozen=True, eq=False)
class LaplacianGraph:
    """Unnormalized Laplacian L = D - K over pooled [source; target] rows."""

    kernel_matrix : np.ndarray
    degrees       : np.ndarray
    laplacian     : np.ndarray
    n_source      : int
    n_target      : int
    mu_R          : float      # lambda_min(L_TT)
    L_R           : float      # lambda_max(L)

    @property
    def n(self) -> int:
        return self.n_source + self.n_target

    @property
    def disconnected(self) -> bool:
        return self.mu_R <= DISCONNECTED_TOL

    @property
    def L_SS(self) -> np.ndarray:
        return self.laplacian[: self.n_source, : self.n_source]

    @property
    def L_ST(self) -> np.ndarray:
        return self.laplacian[: self.n_source, self.n_source:]

    @property
    def L_TS(self) -> np.ndarray:
        return self.laplacian[self.n_source:, : self.n_source]

    @property
    def L_TT(self) -> np.ndarray:
        return self.laplacian[self.n_source:, self.n_source:]

    @classmethod
    def from_kernel_matrix(cls, K: np.ndarray, n_source: int, n_target: int) -> "LaplacianGraph":
        K = np.array(K, dtype=np.float64)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValidationError(f"kernel matrix must be square, got {K.shape}")
        if K.shape[0] != n_source + n_target:
            raise ValidationError(f"kernel matrix has {K.shape[0]} rows, expected {n_source + n_target}")
        if n_source + n_target < 2:
            raise ValidationError("a graph needs at least two points")
        if np.any(K < 0):
            raise ValidationError("kernel matrix has negative entries")
        K = 0.5 * (K + K.T)
        degrees = K.sum(axis=1)
        L = np.diag(degrees) - K
        for array in (K, degrees, L):
            array.setflags(write=False)
        graph = cls(K, degrees, L, int(n_source), int(n_target), 0.0, 0.0)
        mu_R, L_R = regularizer_constants(graph)
        object.__setattr__(graph, "mu_R", mu_R)
        object.__setattr__(graph, "L_R", L_R)
        return graph

    def save_csv(self, path) -> None:
        frame = pd.DataFrame(self.laplacian, columns=[f"n{j + 1}" for j in range(self.n)])
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def build_graph(source: Dataset, target: Dataset, kernel: KernelSpec) -> LaplacianGraph:
    if source.p != target.p:
        raise ValidationError(f"source has {source.p} features, target has {target.p}")
    if source.n + target.n < 2:
        raise ValidationError("n_source + n_target must be >= 2")
    X = np.vstack([source.features, target.features])
    return LaplacianGraph.from_kernel_matrix(gram_matrix(kernel, X, X), source.n, target.n)


def regularizer_constants(graph: LaplacianGraph) -> Tuple[float, float]:
    """(mu_R, L_R) = (lambda_min(L_TT), lambda_max(L))."""
    L_R, _ = _extremal_eigpair(graph.laplacian, "max")
    if graph.n_target == 0:
        return 0.0, L_R
    mu_R, _ = _extremal_eigpair(graph.L_TT, "min")
    return mu_R, L_R
