from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.spatial.distance import cdist
from simple_parsing.helpers import Serializable, choice

from utils.exceptions import ConfigError, ValidationError

PROJECTION_TOL = 1e-10


@dataclass
class MetricSpec(Serializable):
    """Euclidean distance, or the fair distance ||P (x - x')|| for a projection P."""

    kind       : str                         = choice("euclidean", "fair_projection", default="euclidean")
    projection : Optional[List[List[float]]] = None   # p x p symmetric idempotent matrix

    def validate(self, path: str = "kernel.metric", p: Optional[int] = None) -> None:
        if self.kind not in ("euclidean", "fair_projection"):
            raise ConfigError(f"{path}.kind", f"unknown metric {self.kind!r}")
        if self.kind == "euclidean":
            return
        if self.projection is None:
            raise ConfigError(f"{path}.projection", "fair_projection needs a projection matrix")
        P = np.asarray(self.projection, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ConfigError(f"{path}.projection", f"must be square, got shape {P.shape}")
        if p is not None and P.shape[0] != p:
            raise ConfigError(f"{path}.projection", f"must be {p}x{p}, got {P.shape}")
        if np.max(np.abs(P - P.T)) > PROJECTION_TOL:
            raise ConfigError(f"{path}.projection", "must be symmetric")
        if np.max(np.abs(P @ P - P)) > PROJECTION_TOL:
            raise ConfigError(f"{path}.projection", "must be idempotent")

    @property
    def matrix(self) -> Optional[np.ndarray]:
        if self.kind == "euclidean":
            return None
        return np.asarray(self.projection, dtype=np.float64)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        P = self.matrix
        if P is None:
            return X
        if P.shape[0] != X.shape[1]:
            raise ValidationError(f"projection is {P.shape[0]}x{P.shape[0]} but features have {X.shape[1]} columns")
        return X @ P

    def distance(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return cdist(self.transform(X), self.transform(Y), metric="euclidean")

    @classmethod
    def projecting_out(cls, directions) -> "MetricSpec":
        """Fair metric ignoring the span of ``directions`` (rows)."""
        B = np.atleast_2d(np.asarray(directions, dtype=np.float64)).T
        Q, _ = np.linalg.qr(B)
        P = np.eye(B.shape[0]) - Q @ Q.T
        P = 0.5 * (P + P.T)
        return cls(kind="fair_projection", projection=P.tolist())


@dataclass
class KernelSpec(Serializable):
    family    : str        = choice("rbf", "laplace", default="rbf")
    bandwidth : float      = 1.0
    metric    : MetricSpec = field(default_factory=MetricSpec)
    unit      : bool       = False   # K == 1, the infinite-bandwidth limit

    def validate(self, path: str = "kernel", p: Optional[int] = None) -> None:
        if self.family not in ("rbf", "laplace"):
            raise ConfigError(f"{path}.family", f"unknown kernel family {self.family!r}")
        if not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
            raise ConfigError(f"{path}.bandwidth", f"must be > 0, got {self.bandwidth}")
        self.metric.validate(f"{path}.metric", p)

    @property
    def k_max(self) -> float:
        return 1.0


def gram_matrix(kernel: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise ValidationError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if kernel.unit:
        return np.ones((X.shape[0], Y.shape[0]))
    XP, YP = kernel.metric.transform(X), kernel.metric.transform(Y)
    h = kernel.bandwidth
    if kernel.family == "rbf":
        return np.exp(-cdist(XP, YP, metric="sqeuclidean") / (2.0 * h * h))
    return np.exp(-cdist(XP, YP, metric="euclidean") / h)


def kernel_value(kernel: KernelSpec, x, x_prime) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    x_prime = np.asarray(x_prime, dtype=np.float64).reshape(1, -1)
    return float(gram_matrix(kernel, x, x_prime)[0, 0])


def paired_kernel(kernel: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """K(x_i, y_i) row by row."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape != Y.shape:
        raise ValidationError(f"shape mismatch: {X.shape} vs {Y.shape}")
    if kernel.unit:
        return np.ones(X.shape[0])
    diff = kernel.metric.transform(X) - kernel.metric.transform(Y)
    sq = np.einsum("ij,ij->i", diff, diff)
    h = kernel.bandwidth
    if kernel.family == "rbf":
        return np.exp(-sq / (2.0 * h * h))
    return np.exp(-np.sqrt(sq) / h)
