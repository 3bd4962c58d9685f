from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
import torch.nn as nn
from simple_parsing.helpers import Serializable, choice

from utils.exceptions import ConfigError, ValidationError

FAMILIES = ("Linear", "KernelExpansion", "FeatureMapLinear")
FEATURE_MAPS = ("quadratic", "fourier", "step")


@dataclass
class ModelSpec(Serializable):
    """Model class F; every family is linear in its weights."""

    family              : str           = choice(*FAMILIES, default="Linear")
    feature_map         : Optional[str] = None    # FeatureMapLinear only: quadratic, fourier or step
    fit_intercept       : bool          = True
    expansion_bandwidth : float         = 1.0     # RBF bandwidth of KernelExpansion
    ridge               : float         = 0.0     # jitter added to the normal equations

    def validate(self, path: str = "solver.model") -> None:
        if self.family not in FAMILIES:
            raise ConfigError(f"{path}.family", f"must be one of {FAMILIES}, got {self.family!r}")
        if self.family == "FeatureMapLinear" and self.feature_map not in FEATURE_MAPS:
            raise ConfigError(f"{path}.feature_map", f"must be one of {FEATURE_MAPS} for FeatureMapLinear")
        if not np.isfinite(self.ridge) or self.ridge < 0:
            raise ConfigError(f"{path}.ridge", f"must be >= 0, got {self.ridge}")
        if not np.isfinite(self.expansion_bandwidth) or self.expansion_bandwidth <= 0:
            raise ConfigError(f"{path}.expansion_bandwidth", "must be > 0")


class BaseModel(nn.Module):
    """f(x) = phi(x) . w with phi given by ``features``."""

    differentiable = True

    def __init__(self, spec: ModelSpec, n_features: int, anchors: Optional[np.ndarray] = None) -> None:
        super().__init__()
        self.spec = spec
        self.n_features = int(n_features)
        if anchors is not None:
            self.register_buffer("anchors", torch.as_tensor(np.asarray(anchors, dtype=np.float64)))
        else:
            self.anchors = None
        self.weights = nn.Parameter(torch.zeros(self.n_params, dtype=torch.float64))

    @property
    def n_params(self) -> int:
        raise NotImplementedError

    def features(self, x: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.features(x) @ self.weights

    def _as_tensor(self, X) -> torch.Tensor:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ValidationError(f"model expects {self.n_features} features, got {X.shape[1]}")
        return torch.as_tensor(X)

    def design_matrix(self, X) -> np.ndarray:
        with torch.no_grad():
            return self.features(self._as_tensor(X)).numpy().copy()

    def predict(self, X) -> np.ndarray:
        with torch.no_grad():
            return self.forward(self._as_tensor(X)).numpy().copy()

    def set_weights(self, weights: np.ndarray) -> "BaseModel":
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if weights.shape[0] != self.n_params:
            raise ValidationError(f"expected {self.n_params} weights, got {weights.shape[0]}")
        if not np.all(np.isfinite(weights)):
            raise ValidationError("weights must be finite")
        with torch.no_grad():
            self.weights.copy_(torch.as_tensor(weights))
        return self

    def get_weights(self) -> np.ndarray:
        return self.weights.detach().numpy().copy()

    @property
    def slope(self) -> np.ndarray:
        """Weights acting on raw features (Linear family)."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        payload = {
            "family": self.spec.family,
            "n_features": self.n_features,
            "weights": self.get_weights().tolist(),
            "spec": self.spec.to_dict(),
        }
        if self.anchors is not None:
            payload["anchors"] = self.anchors.numpy().tolist()
        return payload
