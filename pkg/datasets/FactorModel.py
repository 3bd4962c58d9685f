from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np
from simple_parsing.helpers import Serializable, list_field

from datasets.base import Dataset, Domain
from datasets.CovariateShift import check_gaussian_law, sample_gaussian
from utils.exceptions import ConfigError, ValidationError
from utils.seeding import split_rngs


@dataclass
class FactorModelSpec(Serializable):
    """X = A U + b Z + eps, with optional labels y = c.U + gamma Z + noise."""

    loading             : List[List[float]]     = list_field([1.0, 0.0], [0.0, 0.0])   # A, p x k
    protected_direction : List[float]           = list_field(0.0, 1.0)                 # b
    noise_sd            : float                 = 0.1
    u_mean              : List[float]           = list_field(0.0, 0.0)
    u_cov               : List[List[float]]     = list_field([1.0, 0.0], [0.0, 1.0])
    label_weights       : Optional[List[float]] = None     # c; labels are omitted when unset
    protected_effect    : float                 = 0.0      # gamma, historical label bias carried by Z
    label_noise_sd      : float                 = 0.0
    seed                : int                   = 0

    @property
    def A(self) -> np.ndarray:
        return np.asarray(self.loading, dtype=np.float64)

    @property
    def b(self) -> np.ndarray:
        return np.asarray(self.protected_direction, dtype=np.float64)

    @property
    def p(self) -> int:
        return len(self.protected_direction)

    @property
    def k(self) -> int:
        return len(self.u_mean)

    def validate(self, path: str = "factor") -> None:
        try:
            A = self.A
        except ValueError:
            raise ConfigError(f"{path}.loading", "ragged matrix")
        if A.ndim != 2:
            raise ConfigError(f"{path}.loading", "must be a p x k matrix")
        if A.shape[0] != self.p:
            raise ConfigError(f"{path}.loading", f"has {A.shape[0]} rows but protected_direction has length {self.p}")
        if A.shape[1] != self.k:
            raise ConfigError(f"{path}.loading", f"has {A.shape[1]} columns but u_mean has length {self.k}")
        check_gaussian_law(self.u_mean, self.u_cov, f"{path}.u")
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(self.b)):
            raise ConfigError(path, "loading and protected_direction must be finite")
        for name in ("noise_sd", "label_noise_sd"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigError(f"{path}.{name}", f"must be >= 0, got {value}")
        if self.label_weights is not None and len(self.label_weights) != self.k:
            raise ConfigError(f"{path}.label_weights", f"expected length {self.k}, got {len(self.label_weights)}")

    def with_seed(self, seed: int) -> "FactorModelSpec":
        return replace(self, seed=int(seed))


def generate_factor_model(spec: FactorModelSpec, n: int, z_balance: float) -> Dataset:
    """Rows with Z=1 follow A U + b + eps, rows with Z=0 follow A U + eps."""
    if not 0.0 < z_balance < 1.0:
        raise ValidationError(f"z_balance must lie in (0, 1), got {z_balance}")
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    spec.validate()
    rng_z, rng_u, rng_e, rng_y = split_rngs(spec.seed, 4)
    z = (rng_z.random(n) < z_balance).astype(np.int64)
    mean, cov = check_gaussian_law(spec.u_mean, spec.u_cov, "factor.u")
    U = sample_gaussian(rng_u, mean, cov, n)
    eps = rng_e.normal(0.0, spec.noise_sd, size=(n, spec.p))
    X = U @ spec.A.T + np.outer(z, spec.b) + eps

    labels = None
    if spec.label_weights is not None:
        labels = (
            U @ np.asarray(spec.label_weights, dtype=np.float64)
            + spec.protected_effect * z
            + rng_y.normal(0.0, spec.label_noise_sd, n)
        )
    return Dataset(X, labels, Domain.SOURCE, z)
