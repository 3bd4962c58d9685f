"""Quadratic loss 1/2 (a - b)^2 and its curvature constants.

Along each argument slice the loss has curvature exactly 1, so mu_L = L_L = 1.
Jointly the Hessian [[1, -1], [-1, 1]] is singular; bounds only use the slices.
"""
import numpy as np
import torch
import torch.nn as nn

MU_L = 1.0
L_L = 1.0


def quadratic_loss(a, b) -> np.ndarray:
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return 0.5 * diff * diff


def quadratic_loss_grad(a, b) -> np.ndarray:
    """d/da of 1/2 (a - b)^2."""
    return np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)


def mean_risk(a, b) -> float:
    return float(np.mean(quadratic_loss(a, b))) if np.size(a) else 0.0


class QuadraticLoss(nn.Module):
    def forward(self, predictions: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
        return 0.5 * ((predictions - targets) ** 2).mean()
