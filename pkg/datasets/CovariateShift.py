from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy.stats import multivariate_normal
from simple_parsing.helpers import Serializable, list_field

from datasets.base import Dataset, Domain
from datasets.regression import RegressionFunction
from utils.exceptions import ConfigError
from utils.seeding import split_rngs

PSD_TOL = 1e-10


def check_gaussian_law(mean, cov, path: str, dim: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Validate a (mean, covariance) pair and return them as arrays."""
    mean_arr = np.asarray(mean, dtype=np.float64).reshape(-1)
    try:
        cov_arr = np.asarray(cov, dtype=np.float64)
    except ValueError as err:
        raise ConfigError(f"{path}_cov", f"ragged matrix ({err})")
    if dim is not None and mean_arr.shape[0] != dim:
        raise ConfigError(f"{path}_mean", f"expected length {dim}, got {mean_arr.shape[0]}")
    k = mean_arr.shape[0]
    if cov_arr.shape != (k, k):
        raise ConfigError(f"{path}_cov", f"expected a {k}x{k} matrix, got shape {cov_arr.shape}")
    if not (np.all(np.isfinite(mean_arr)) and np.all(np.isfinite(cov_arr))):
        raise ConfigError(path, "law parameters must be finite")
    if np.max(np.abs(cov_arr - cov_arr.T), initial=0.0) > PSD_TOL:
        raise ConfigError(f"{path}_cov", "covariance is not symmetric")
    lowest = np.linalg.eigvalsh(cov_arr)[0] if k else 0.0
    if lowest < -PSD_TOL * max(1.0, np.abs(cov_arr).max(initial=0.0)):
        raise ConfigError(f"{path}_cov", f"covariance is not positive semidefinite (min eigenvalue {lowest:.3e})")
    return mean_arr, cov_arr


def sample_gaussian(rng: np.random.Generator, mean: np.ndarray, cov: np.ndarray, n: int) -> np.ndarray:
    return rng.multivariate_normal(mean, cov, size=n, method="eigh")


@dataclass
class CovariateShiftSpec(Serializable):
    """Source law P and target law Q sharing one regression function."""

    regression_fn        : RegressionFunction           = field(default_factory=RegressionFunction)
    source_mean          : List[float]                  = list_field(0.0)
    source_cov           : List[List[float]]            = list_field([1.0])
    target_mean          : List[float]                  = list_field(2.0)
    target_cov           : List[List[float]]            = list_field([1.0])
    source_noise_sd      : float                        = 0.1
    target_noise_sd      : float                        = 0.1
    protected_coordinate : Optional[int]                = None   # z = 1{x_j > 0} when set
    target_regression_fn : Optional[RegressionFunction] = None   # f_t for general shift, ignored under covariate shift
    seed                 : int                          = 0

    @property
    def p(self) -> int:
        return len(self.source_mean)

    def validate(self, path: str = "data") -> None:
        check_gaussian_law(self.source_mean, self.source_cov, f"{path}.source")
        check_gaussian_law(self.target_mean, self.target_cov, f"{path}.target", dim=self.p)
        for name in ("source_noise_sd", "target_noise_sd"):
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ConfigError(f"{path}.{name}", f"must be >= 0, got {value}")
        if self.protected_coordinate is not None and not 0 <= self.protected_coordinate < self.p:
            raise ConfigError(f"{path}.protected_coordinate", f"must lie in [0, {self.p})")
        self.regression_fn.validate(f"{path}.regression_fn", self.p)
        if self.target_regression_fn is not None:
            self.target_regression_fn.validate(f"{path}.target_regression_fn", self.p)

    def with_seed(self, seed: int) -> "CovariateShiftSpec":
        return replace(self, seed=int(seed))

    def laws(self):
        source = check_gaussian_law(self.source_mean, self.source_cov, "data.source")
        target = check_gaussian_law(self.target_mean, self.target_cov, "data.target", dim=self.p)
        return source, target

    def sample_features(self, rng: np.random.Generator, n: int, domain: Domain) -> np.ndarray:
        (ms, cs), (mt, ct) = self.laws()
        if domain == Domain.SOURCE:
            return sample_gaussian(rng, ms, cs, n)
        return sample_gaussian(rng, mt, ct, n)

    def density_ratio(self, X: np.ndarray) -> np.ndarray:
        """dQ/dP evaluated at X; requires non-singular covariances."""
        (ms, cs), (mt, ct) = self.laws()
        log_q = multivariate_normal(mt, ct).logpdf(X)
        log_p = multivariate_normal(ms, cs).logpdf(X)
        return np.exp(np.atleast_1d(log_q - log_p))


def _protected(spec: CovariateShiftSpec, X: np.ndarray) -> Optional[np.ndarray]:
    if spec.protected_coordinate is None:
        return None
    return (X[:, spec.protected_coordinate] > 0).astype(np.int64)


def _draw(spec: CovariateShiftSpec, n_source: int, n_target: int, target_fn: RegressionFunction):
    if n_source < 1 or n_target < 1:
        raise ConfigError("sizes", f"n_source and n_target must be >= 1, got {n_source}, {n_target}")
    spec.validate()
    # streams: source features, source noise, target features, target noise
    rng_xs, rng_es, rng_xt, rng_et = split_rngs(spec.seed, 4)
    xs = spec.sample_features(rng_xs, n_source, Domain.SOURCE)
    xt = spec.sample_features(rng_xt, n_target, Domain.TARGET)
    ys = spec.regression_fn(xs) + rng_es.normal(0.0, spec.source_noise_sd, n_source)
    yt = target_fn(xt) + rng_et.normal(0.0, spec.target_noise_sd, n_target)
    source = Dataset(xs, ys, Domain.SOURCE, _protected(spec, xs))
    target = Dataset(xt, yt, Domain.TARGET, _protected(spec, xt), labels_held_out=True)
    return source, target


def generate_covariate_shift(spec: CovariateShiftSpec, n_source: int, n_target: int) -> Tuple[Dataset, Dataset]:
    """Labeled source and (held-out labeled) target draws sharing ``spec.regression_fn``."""
    return _draw(spec, n_source, n_target, spec.regression_fn)


def generate_general_shift(spec: CovariateShiftSpec, n_source: int, n_target: int) -> Tuple[Dataset, Dataset]:
    """Like ``generate_covariate_shift`` but target labels follow ``spec.target_regression_fn``."""
    target_fn = spec.target_regression_fn or spec.regression_fn
    return _draw(spec, n_source, n_target, target_fn)
