"""Linear representations aligned across protected groups.

Phi is fitted by gradient descent on S(X_1 Phi', X_0 Phi') + gamma ||Phi Phi' - I||_F^2
with S the debiased Sinkhorn divergence. Under the factor model an exact
alignment forces Phi b = 0, so the relative leakage ||Phi b|| / (||Phi||_F ||b||)
is the quantity checked.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import torch
from scipy.stats import spearmanr

from datasets.FactorModel import FactorModelSpec, generate_factor_model
from datasets.base import Dataset
from models.losses.adversarial import evaluate
from models.losses.sinkhorn import SinkhornConfig, SinkhornDivergence, sinkhorn_divergence
from theory.reports import BoundReport
from utils.exceptions import NumericError, ValidationError
from utils.metrics import MetricReport
from utils.seeding import make_rng

LEAKAGE_TOLERANCE = 1e-2
MAX_HALVINGS = 30


@dataclass(frozen=True, eq=False)
class AlignmentMap:
    matrix : np.ndarray     # q x p

    def __post_init__(self):
        M = np.array(self.matrix, dtype=np.float64)
        if M.ndim != 2:
            raise ValidationError(f"alignment map must be a matrix, got shape {M.shape}")
        q, p = M.shape
        if not q < p:
            raise ValidationError(f"alignment map needs q < p, got {q}x{p}")
        if not np.all(np.isfinite(M)):
            raise ValidationError("alignment map has non-finite entries")
        norms = np.linalg.norm(M, axis=1)
        if np.any(norms < 1e-8) or np.any(norms > 1e8):
            raise ValidationError(f"row norms {norms.tolist()} outside [1e-8, 1e8]")
        if np.linalg.svd(M, compute_uv=False)[-1] <= 1e-8:
            raise ValidationError("alignment map is not of full row rank")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def q(self) -> int:
        return self.matrix.shape[0]

    @property
    def p(self) -> int:
        return self.matrix.shape[1]

    def transform(self, X) -> np.ndarray:
        return np.atleast_2d(np.asarray(X, dtype=np.float64)) @ self.matrix.T

    def relative_leakage(self, b) -> float:
        b = np.asarray(b, dtype=np.float64)
        return float(np.linalg.norm(self.matrix @ b) / (np.linalg.norm(self.matrix) * np.linalg.norm(b)))

    def to_json(self) -> dict:
        return {"q": self.q, "p": self.p, "matrix": self.matrix.tolist()}

    @classmethod
    def from_json(cls, payload: dict) -> "AlignmentMap":
        M = np.asarray(payload["matrix"], dtype=np.float64)
        if M.shape != (payload["q"], payload["p"]):
            raise ValidationError(f"matrix shape {M.shape} disagrees with q={payload['q']}, p={payload['p']}")
        return cls(M)


@dataclass
class AlignmentTrace:
    objective  : List[float]      = field(default_factory=list)
    divergence : List[float]      = field(default_factory=list)
    maps       : List[np.ndarray] = field(default_factory=list)

    def relative_leakage(self, b) -> List[float]:
        b = np.asarray(b, dtype=np.float64)
        return [float(np.linalg.norm(M @ b) / (np.linalg.norm(M) * np.linalg.norm(b))) for M in self.maps]

    def rows(self, b) -> List[dict]:
        leakage = self.relative_leakage(b)
        return [
            {"step": i, "objective": o, "divergence": d, "relative_leakage": r}
            for i, (o, d, r) in enumerate(zip(self.objective, self.divergence, leakage))
        ]


def _orthonormal_init(rng: np.random.Generator, q: int, p: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.normal(size=(p, q)))
    # sign-fix so the factorization is unique
    return (Q * np.sign(np.diag(R))[None, :]).T


def fit_alignment(dataset: Dataset, q: int, cfg: SinkhornConfig, steps: int, step_size: float, seed: int,
                  penalty: float = 1.0, max_points: Optional[int] = None) -> Tuple[AlignmentMap, AlignmentTrace]:
    """torch.optim.SGD on the alignment objective, halving the rate until a step does not increase it."""
    if dataset.protected is None:
        raise ValidationError("alignment needs a protected attribute")
    if not 0 < q < dataset.p:
        raise ValidationError(f"q must satisfy 0 < q < p = {dataset.p}, got {q}")
    if steps < 0 or not step_size > 0 or penalty < 0:
        raise ValidationError("steps must be >= 0, step_size > 0 and penalty >= 0")
    X1, X0 = dataset.group(1).features, dataset.group(0).features
    if len(X1) == 0 or len(X0) == 0:
        raise ValidationError("both protected groups must be nonempty")
    if max_points is not None:
        X1, X0 = X1[:max_points], X0[:max_points]
    x1, x0 = torch.as_tensor(X1), torch.as_tensor(X0)
    eye = torch.eye(q, dtype=torch.float64)
    loss = SinkhornDivergence(cfg, warm_start=True)

    def objective(phi: torch.Tensor):
        divergence = loss(x1 @ phi.T, x0 @ phi.T)
        return divergence + penalty * ((phi @ phi.T - eye) ** 2).sum(), divergence

    phi = torch.nn.Parameter(torch.as_tensor(_orthonormal_init(make_rng(seed), q, dataset.p)))
    optimizer = torch.optim.SGD([phi], lr=step_size)
    trace = AlignmentTrace()

    def record(value, divergence, matrix):
        value, divergence = float(value), float(divergence)
        if not (np.isfinite(value) and np.isfinite(divergence)):
            raise NumericError("alignment", f"objective became non-finite at step {len(trace.objective)}")
        trace.objective.append(value)
        trace.divergence.append(divergence)
        trace.maps.append(matrix.detach().numpy().copy())

    def set_lr(lr: float) -> None:
        for group in optimizer.param_groups:
            group["lr"] = lr

    value, divergence = objective(phi)
    record(value, divergence, phi)
    for _ in range(steps):
        optimizer.zero_grad()
        value.backward()
        previous = phi.detach().clone()
        accepted = False
        for _ in range(MAX_HALVINGS):
            optimizer.step()
            new_value, new_divergence = objective(phi)
            if float(new_value) <= float(value):
                accepted = True
                break
            # rejected: roll back and halve
            with torch.no_grad():
                phi.copy_(previous)
            set_lr(0.5 * optimizer.param_groups[0]["lr"])
        if not accepted:
            break
        value = new_value
        record(new_value, new_divergence, phi)
        set_lr(min(2.0 * optimizer.param_groups[0]["lr"], step_size))

    return AlignmentMap(trace.maps[-1]), trace


def verify_theorem4(alignment: AlignmentMap, spec: FactorModelSpec, n: int, seed: int, cfg: SinkhornConfig,
                    trace: Optional[AlignmentTrace] = None) -> BoundReport:
    """Relative leakage of Phi against the ground-truth b on fresh factor-model draws.

    ``n`` rows are drawn per protected group in expectation (2n rows, balanced Z).
    """
    data = generate_factor_model(spec.with_seed(seed), 2 * n, 0.5)
    b = spec.b
    leakage = alignment.relative_leakage(b)
    divergence = sinkhorn_divergence(
        alignment.transform(data.group(1).features), alignment.transform(data.group(0).features), cfg
    )
    constants = {"sinkhorn_divergence": divergence, "q": alignment.q, "p": alignment.p, "n": n,
                 "b_norm": float(np.linalg.norm(b)), "blur": cfg.blur}
    notes = ["finite-sample surrogate: relative ||Phi b|| checked against an engineering tolerance"]
    if trace is not None and len(trace.divergence) >= 3:
        rho = spearmanr(trace.divergence, trace.relative_leakage(b)).correlation
        constants.update({
            "spearman": float(rho) if np.isfinite(rho) else float("nan"),
            "initial_divergence": trace.divergence[0],
            "final_divergence": trace.divergence[-1],
            "initial_leakage": trace.relative_leakage(b)[0],
        })
    return BoundReport.build("T4", leakage, {"leakage_tolerance": LEAKAGE_TOLERANCE}, constants,
                             seeds=[seed], notes=notes)


class RepresentationModel:
    """A head fitted on Phi-features, evaluated on raw inputs."""

    def __init__(self, head, alignment: AlignmentMap) -> None:
        self.head = head
        self.alignment = alignment

    def predict(self, X) -> np.ndarray:
        return evaluate(self.head, self.alignment.transform(X))


def prediction_consistency(model, dataset: Dataset, flip_direction, alignment: Optional[AlignmentMap] = None) -> MetricReport:
    """Agreement of f(x) and f(x + (1 - 2z) b).

    With ``alignment`` the model reads Phi-features and the flip is applied as
    Phi x + (1 - 2z) Phi b, which is exact when Phi b = 0.
    """
    if dataset.protected is None:
        raise ValidationError("prediction consistency needs a protected attribute")
    b = np.asarray(flip_direction, dtype=np.float64).reshape(-1)
    if b.shape[0] != dataset.p:
        raise ValidationError(f"flip direction has length {b.shape[0]}, dataset has {dataset.p} features")
    sign = (1 - 2 * dataset.protected).astype(np.float64)[:, None]
    if alignment is None:
        original, flipped = dataset.features, dataset.features + sign * b[None, :]
    else:
        original = alignment.transform(dataset.features)
        flipped = original + sign * (alignment.matrix @ b)[None, :]
    before, after = evaluate(model, original), evaluate(model, flipped)
    classification = float(np.mean((before > 0) == (after > 0)))
    regression = float(np.mean(np.abs(before - after)))
    return MetricReport(
        "prediction_consistency", classification,
        {"classification": classification, "regression": regression},
        ["classification thresholds the regression output at 0"],
    )
