import torch

from models.__base import BaseModel

FOURIER_ORDERS = (1, 2)


class FeatureMapLinear(BaseModel):
    """Linear model on a fixed coordinate-wise feature map (mis-specification knob)."""

    @property
    def differentiable(self) -> bool:
        return self.spec.feature_map != "step"

    @property
    def n_params(self) -> int:
        per_coord = {"quadratic": 2, "fourier": 2 * len(FOURIER_ORDERS), "step": 2}[self.spec.feature_map]
        return per_coord * self.n_features + int(self.spec.fit_intercept)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        if self.spec.feature_map == "quadratic":
            blocks = [x, x * x]
        elif self.spec.feature_map == "fourier":
            blocks = []
            for k in FOURIER_ORDERS:
                blocks += [torch.sin(k * x), torch.cos(k * x)]
        else:
            blocks = [x, (x > 0).to(x.dtype)]
        if self.spec.fit_intercept:
            blocks.append(torch.ones(x.shape[0], 1, dtype=x.dtype))
        return torch.cat(blocks, dim=1)
