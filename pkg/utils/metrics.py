import wandb
import numpy as np
import pandas as pd
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

from sklearn.metrics import balanced_accuracy_score

from datasets.base import Dataset
from models.kernels import MetricSpec
from models.losses.adversarial import evaluate
from utils.exceptions import ValidationError
from utils.io import to_jsonable
from utils.seeding import make_rng

"""
Group-aware classification rates and the empirical individual-fairness probe.
"""

ZERO_DISTANCE = 1e-12


@dataclass
class MetricReport:
    name         : str
    value        : float
    group_values : Optional[Dict[str, float]] = None
    notes        : List[str]                  = field(default_factory=list)

    def to_dict(self) -> dict:
        return to_jsonable(asdict(self))


def _binary(values, name: str) -> np.ndarray:
    arr = np.asarray(values).reshape(-1)
    if not np.all(np.isin(arr, (0, 1))):
        raise ValidationError(f"{name} must be binary (0/1)")
    return arr.astype(np.int64)


def _same_length(*arrays) -> None:
    lengths = {len(a) for a in arrays}
    if len(lengths) != 1:
        raise ValidationError(f"length mismatch: {sorted(lengths)}")


def balanced_accuracy(predictions, labels) -> MetricReport:
    predictions, labels = _binary(predictions, "predictions"), _binary(labels, "labels")
    _same_length(predictions, labels)
    if len(np.unique(labels)) < 2:
        raise ValidationError("balanced accuracy needs both classes among the labels")
    return MetricReport("balanced_accuracy", float(balanced_accuracy_score(labels, predictions)))


def group_tnr(predictions, labels, groups) -> MetricReport:
    """True-negative rate per group, averaged with equal group weights."""
    predictions, labels = _binary(predictions, "predictions"), _binary(labels, "labels")
    groups = np.asarray(groups).reshape(-1)
    _same_length(predictions, labels, groups)
    frame = pd.DataFrame({"pred": predictions, "label": labels, "group": groups.astype(str)})
    per_group = {}
    for name, rows in frame.groupby("group", sort=True):
        negatives = rows[rows["label"] == 0]
        if negatives.empty:
            raise ValidationError(f"group {name!r} has no negative labels")
        per_group[name] = float((negatives["pred"] == 0).mean())
    return MetricReport("group_tnr", float(np.mean(list(per_group.values()))), per_group)


def worst_per_group_accuracy(predictions, labels, classes, groups) -> MetricReport:
    """For each class the minimum accuracy over groups, averaged over classes."""
    predictions, labels = np.asarray(predictions).reshape(-1), np.asarray(labels).reshape(-1)
    classes, groups = np.asarray(classes).reshape(-1), np.asarray(groups).reshape(-1)
    _same_length(predictions, labels, classes, groups)
    frame = pd.DataFrame({
        "correct": predictions == labels, "cls": classes.astype(str), "group": groups.astype(str),
    })
    all_groups = sorted(frame["group"].unique())
    accuracy = frame.groupby(["cls", "group"], sort=True)["correct"].mean()
    per_class = {}
    for cls in sorted(frame["cls"].unique()):
        cells = accuracy.loc[cls]
        for group in all_groups:
            if group not in cells.index:
                raise ValidationError(f"cell (class={cls!r}, group={group!r}) is empty")
        per_class[cls] = float(cells.min())
    return MetricReport("worst_per_group_accuracy", float(np.mean(list(per_class.values()))), per_class)


def linear_lipschitz_certificate(weights: np.ndarray, metric: MetricSpec) -> float:
    """Exact global constant of x -> w.x under d(x, x') = ||M (x - x')||."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    M = metric.matrix
    if M is None:
        return float(np.linalg.norm(w))
    # w must lie in range(P) for the ratio to stay bounded on the metric's null space
    if np.linalg.norm(w - M @ w) > 1e-9 * max(1.0, np.linalg.norm(w)):
        return float("inf")
    return float(np.linalg.norm(w))


def empirical_if_lipschitz(model, dataset: Dataset, metric: MetricSpec, pairs: int, seed: int,
                           flip_direction: Optional[np.ndarray] = None) -> MetricReport:
    """Max |f(x) - f(x')| / d(x, x') over sampled pairs.

    Uniform pairs come from the dataset; when ``flip_direction`` is given and
    the dataset has a protected attribute, every sampled row is also paired
    with its flip x + (1 - 2z) b. Pairs at distance zero are reported
    separately as exact-consistency checks.
    """
    if pairs < 1:
        raise ValidationError(f"pairs must be >= 1, got {pairs}")
    X = dataset.features
    rng = make_rng(seed)
    i, j = rng.integers(0, dataset.n, size=pairs), rng.integers(0, dataset.n, size=pairs)
    left, right = [X[i]], [X[j]]
    if flip_direction is not None and dataset.protected is not None:
        b = np.asarray(flip_direction, dtype=np.float64)
        sign = (1 - 2 * dataset.protected[i]).astype(np.float64)
        left.append(X[i])
        right.append(X[i] + sign[:, None] * b[None, :])
    left, right = np.vstack(left), np.vstack(right)

    gap = np.abs(evaluate(model, left) - evaluate(model, right))
    distance = np.linalg.norm(metric.transform(left) - metric.transform(right), axis=1)
    positive = distance > ZERO_DISTANCE
    ratio = float(np.max(gap[positive] / distance[positive])) if np.any(positive) else 0.0
    zero = ~positive
    group_values = {
        "zero_distance_pairs": float(np.sum(zero)),
        "zero_distance_max_gap": float(np.max(gap[zero])) if np.any(zero) else 0.0,
        "zero_distance_consistent": float(np.all(gap[zero] <= ZERO_DISTANCE)) if np.any(zero) else 1.0,
    }
    notes = []
    if getattr(model, "spec", None) is not None and model.spec.family == "Linear":
        group_values["linear_certificate"] = linear_lipschitz_certificate(model.slope, metric)
        notes.append("linear_certificate is the exact global constant")
    return MetricReport("empirical_if_lipschitz", ratio, group_values, notes)


class MetricsModule():
    """Collects metric reports for one run and pushes them to wandb."""

    def __init__(self) -> None:
        self.reports: Dict[str, MetricReport] = {}

    def update_metrics(self, report: MetricReport) -> None:
        self.reports[report.name] = report

    def to_dict(self) -> dict:
        return {name: report.to_dict() for name, report in sorted(self.reports.items())}

    def log_metrics(self, name: str) -> None:
        payload = {f"{name}/{key}": report.value for key, report in self.reports.items()}
        for key, report in self.reports.items():
            for group, value in (report.group_values or {}).items():
                payload[f"{name}/{key}/{group}"] = value
        if wandb.run is not None:
            wandb.log(payload)
