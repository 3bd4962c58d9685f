"""Catalog of oracle regression functions f_0.

Every entry evaluates ``scale * g(u) + offset`` where ``u = x @ weights`` (or the
first coordinate when no weights are given) and ``g`` is the catalog shape.
"""
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import torch
from simple_parsing.helpers import Serializable, choice

from utils.exceptions import ConfigError

KINDS = ("linear", "sine", "step", "quadratic")


@dataclass
class RegressionFunction(Serializable):
    kind      : str                   = choice(*KINDS, default="linear")
    weights   : Optional[List[float]] = None     # projection direction, defaults to e_1
    frequency : float                 = 1.0      # sine only
    threshold : float                 = 0.0      # step only
    scale     : float                 = 1.0
    offset    : float                 = 0.0

    def validate(self, path: str = "regression_fn", p: Optional[int] = None) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"{path}.kind", f"must be one of {KINDS}, got {self.kind!r}")
        if self.weights is not None and p is not None and len(self.weights) != p:
            raise ConfigError(f"{path}.weights", f"expected length {p}, got {len(self.weights)}")
        for name in ("frequency", "threshold", "scale", "offset"):
            if not np.isfinite(getattr(self, name)):
                raise ConfigError(f"{path}.{name}", "must be finite")

    def projection(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if self.weights is None:
            return X[:, 0].copy()
        return X @ np.asarray(self.weights, dtype=np.float64)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        u = self.projection(X)
        if self.kind == "linear":
            shape = u
        elif self.kind == "sine":
            shape = np.sin(self.frequency * u)
        elif self.kind == "step":
            shape = (u > self.threshold).astype(np.float64)
        else:
            shape = u * u
        return self.scale * shape + self.offset

    @property
    def is_differentiable(self) -> bool:
        return self.kind != "step"

    @classmethod
    def constant(cls, value: float) -> "RegressionFunction":
        return cls(kind="linear", scale=0.0, offset=value)

    def torch_forward(self, x):
        """Same function on a torch tensor, for autograd through the oracle."""
        if self.weights is None:
            u = x[:, 0]
        else:
            u = x @ torch.as_tensor(self.weights, dtype=x.dtype)
        if self.kind == "linear":
            shape = u
        elif self.kind == "sine":
            shape = torch.sin(self.frequency * u)
        elif self.kind == "step":
            shape = (u > self.threshold).to(x.dtype)
        else:
            shape = u * u
        return self.scale * shape + self.offset
