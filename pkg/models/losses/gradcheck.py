from typing import Callable

import numpy as np
import torch

from models.losses.laplacian import laplacian_regularizer
from models.losses.sinkhorn import SinkhornDivergence

FD_STEP = 1e-5


def central_differences(fn: Callable[[np.ndarray], float], x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    h = step * max(1.0, float(np.max(np.abs(x), initial=0.0)))
    grad = np.zeros_like(x)
    flat, out = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = fn(x)
        flat[i] = keep - h
        down = fn(x)
        flat[i] = keep
        out[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max_i |a_i - n_i| relative to the larger sup-norm of the two gradients."""
    analytic, numeric = np.asarray(analytic).reshape(-1), np.asarray(numeric).reshape(-1)
    scale = max(np.max(np.abs(analytic), initial=0.0), np.max(np.abs(numeric), initial=0.0))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric)) / max(scale, 1e-12))


def _laplacian(instance) -> float:
    graph, outputs = instance["graph"], np.asarray(instance["outputs"], dtype=np.float64)
    analytic = laplacian_regularizer(graph, outputs).gradient
    numeric = central_differences(lambda f: laplacian_regularizer(graph, f).value, outputs)
    return relative_error(analytic, numeric)


def _adversarial_inner(instance) -> float:
    objective, delta = instance["objective"], np.asarray(instance["delta"], dtype=np.float64)
    return relative_error(objective.gradient(delta), central_differences(objective.value, delta))


def _sinkhorn(instance) -> float:
    loss = SinkhornDivergence(instance["cfg"])
    xs = torch.as_tensor(np.asarray(instance["xs"], dtype=np.float64))
    ys = torch.as_tensor(np.asarray(instance["ys"], dtype=np.float64))
    phi0 = np.asarray(instance["phi"], dtype=np.float64)

    def value(phi: np.ndarray) -> float:
        with torch.no_grad():
            p = torch.as_tensor(phi)
            return float(loss(xs @ p.T, ys @ p.T))

    p = torch.as_tensor(phi0.copy()).requires_grad_(True)
    (analytic,) = torch.autograd.grad(loss(xs @ p.T, ys @ p.T), p)
    return relative_error(analytic.numpy(), central_differences(value, phi0))


CHECKS = {
    "laplacian": _laplacian,
    "adversarial_inner": _adversarial_inner,
    "sinkhorn": _sinkhorn,
}


def regularizer_gradient_check(op: str, instance: dict) -> float:
    """Max relative error between the analytic gradient of ``op`` and central differences."""
    if op not in CHECKS:
        raise KeyError(f"unknown gradient check {op!r}; choose from {sorted(CHECKS)}")
    return CHECKS[op](instance)
