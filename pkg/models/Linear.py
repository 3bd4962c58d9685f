import numpy as np
import torch

from models.__base import BaseModel


class Linear(BaseModel):
    """f(x) = w.x + c"""

    @property
    def n_params(self) -> int:
        return self.n_features + int(self.spec.fit_intercept)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        if not self.spec.fit_intercept:
            return x
        return torch.cat([x, torch.ones(x.shape[0], 1, dtype=x.dtype)], dim=1)

    @property
    def slope(self) -> np.ndarray:
        return self.get_weights()[: self.n_features]
