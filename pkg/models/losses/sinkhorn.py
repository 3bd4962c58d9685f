from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import torch
import torch.nn as nn
from simple_parsing.helpers import Serializable

from utils.exceptions import ConfigError, NumericError, ValidationError


@dataclass
class SinkhornConfig(Serializable):
    """Debiased entropic OT with squared Euclidean cost; entropic strength eps = blur ** 2."""

    blur      : float = 0.5
    max_iters : int   = 2000
    tol       : float = 1e-9    # L1 violation of the row marginal

    def validate(self, path: str = "sinkhorn") -> None:
        if not np.isfinite(self.blur) or self.blur <= 0:
            raise ConfigError(f"{path}.blur", f"must be > 0, got {self.blur}")
        if self.max_iters < 1:
            raise ConfigError(f"{path}.max_iters", "must be >= 1")
        if not self.tol > 0:
            raise ConfigError(f"{path}.tol", "must be > 0")

    @property
    def eps(self) -> float:
        return self.blur ** 2


def squared_distances(x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    cost = (x * x).sum(1)[:, None] + (y * y).sum(1)[None, :] - 2.0 * x @ y.T
    return cost.clamp_min(0.0)


def entropic_ot(x: torch.Tensor, y: torch.Tensor, cfg: SinkhornConfig,
                g_init: Optional[torch.Tensor] = None) -> Tuple[torch.Tensor, torch.Tensor]:
    """OT_eps between uniform clouds, log-domain Sinkhorn.

    The returned value carries the envelope gradient sum_ij P_ij dC_ij through the
    cost only, with the converged plan held fixed.
    """
    n, m = x.shape[0], y.shape[0]
    eps = cfg.eps
    C = squared_distances(x, y)
    with torch.no_grad():
        Cd = C.detach()
        a_log = torch.full((n,), -np.log(n), dtype=Cd.dtype)
        b_log = torch.full((m,), -np.log(m), dtype=Cd.dtype)
        g = torch.zeros(m, dtype=Cd.dtype) if g_init is None or g_init.shape[0] != m else g_init.clone()
        violation = float("inf")
        for _ in range(cfg.max_iters):
            f = -eps * torch.logsumexp(b_log[None, :] + (g[None, :] - Cd) / eps, dim=1)
            g = -eps * torch.logsumexp(a_log[:, None] + (f[:, None] - Cd) / eps, dim=0)
            log_plan = a_log[:, None] + b_log[None, :] + (f[:, None] + g[None, :] - Cd) / eps
            violation = float((torch.logsumexp(log_plan, dim=1).exp() - a_log.exp()).abs().sum())
            if not np.isfinite(violation):
                raise NumericError("alignment", "Sinkhorn potentials became non-finite")
            if violation <= cfg.tol:
                break
        else:
            raise NumericError(
                "alignment", f"Sinkhorn did not converge in {cfg.max_iters} iterations (marginal violation {violation:.3e})"
            )
        plan = log_plan.exp()
        dual = (a_log.exp() * f).sum() + (b_log.exp() * g).sum()
    surrogate = (plan * C).sum()
    return dual + surrogate - surrogate.detach(), g


class SinkhornDivergence(nn.Module):
    """S(a, b) = OT(a, b) - OT(a, a)/2 - OT(b, b)/2.

    ``warm_start`` keeps the last dual potentials per term, which speeds up
    repeated evaluations on slowly moving clouds (gradient descent on a map).
    """

    def __init__(self, cfg: SinkhornConfig, warm_start: bool = False) -> None:
        super().__init__()
        cfg.validate()
        self.cfg = cfg
        self.warm_start = warm_start
        self._potentials: Dict[str, torch.Tensor] = {}

    def _ot(self, key: str, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        value, g = entropic_ot(x, y, self.cfg, self._potentials.get(key) if self.warm_start else None)
        if self.warm_start:
            self._potentials[key] = g
        return value

    def forward(self, x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        if x.shape[0] == 0 or y.shape[0] == 0:
            raise ValidationError("Sinkhorn divergence needs nonempty point clouds")
        if x.shape[1] != y.shape[1]:
            raise ValidationError(f"column mismatch: {x.shape[1]} vs {y.shape[1]}")
        return self._ot("xy", x, y) - 0.5 * self._ot("xx", x, x) - 0.5 * self._ot("yy", y, y)


def _cloud(points) -> torch.Tensor:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return torch.as_tensor(arr)


def sinkhorn_divergence(xs, ys, cfg: SinkhornConfig) -> float:
    """Debiased entropic OT between two empirical clouds (rows are points)."""
    with torch.no_grad():
        return float(SinkhornDivergence(cfg)(_cloud(xs), _cloud(ys)))
