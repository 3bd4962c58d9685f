from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from utils.exceptions import ValidationError


class Domain(str, Enum):
    SOURCE = "source"
    TARGET = "target"


def _frozen(array: Optional[np.ndarray], dtype=np.float64) -> Optional[np.ndarray]:
    if array is None:
        return None
    out = np.array(array, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with optional labels and protected attribute, tagged by domain.

    Target datasets keep their generated labels but mark them ``labels_held_out``:
    evaluation code may read them, training code must go through ``training_labels``.
    """

    features        : np.ndarray
    labels          : Optional[np.ndarray] = None
    domain          : Domain               = Domain.SOURCE
    protected       : Optional[np.ndarray] = None
    labels_held_out : bool                 = False

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        if features.ndim != 2:
            raise ValidationError(f"features must be a matrix, got shape {features.shape}")
        if not np.all(np.isfinite(features)):
            raise ValidationError("features contain non-finite entries")
        n = features.shape[0]
        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "domain", Domain(self.domain))

        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.float64).reshape(-1)
            if labels.shape[0] != n:
                raise ValidationError(f"labels have length {labels.shape[0]}, features have {n} rows")
            if not np.all(np.isfinite(labels)):
                raise ValidationError("labels contain non-finite entries")
            object.__setattr__(self, "labels", _frozen(labels))

        if self.protected is not None:
            protected = np.asarray(self.protected).reshape(-1)
            if protected.shape[0] != n:
                raise ValidationError(f"protected has length {protected.shape[0]}, features have {n} rows")
            if not np.all(np.isin(protected, (0, 1))):
                raise ValidationError("protected attribute must only contain 0 and 1")
            object.__setattr__(self, "protected", _frozen(protected, dtype=np.int64))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def is_labeled(self) -> bool:
        return self.labels is not None

    def training_labels(self) -> np.ndarray:
        if self.labels is None:
            raise ValidationError(f"{self.domain.value} dataset has no labels")
        if self.labels_held_out:
            raise ValidationError(f"{self.domain.value} labels are held out for evaluation only")
        return self.labels

    def without_labels(self) -> "Dataset":
        return Dataset(self.features, None, self.domain, self.protected)

    def with_features(self, features: np.ndarray) -> "Dataset":
        return Dataset(features, self.labels, self.domain, self.protected, self.labels_held_out)

    def group(self, z: int) -> "Dataset":
        if self.protected is None:
            raise ValidationError("dataset has no protected attribute")
        mask = self.protected == z
        labels = None if self.labels is None else self.labels[mask]
        return Dataset(self.features[mask], labels, self.domain, self.protected[mask], self.labels_held_out)

    def equals(self, other: "Dataset") -> bool:
        def same(a, b):
            if a is None or b is None:
                return a is b
            return a.shape == b.shape and np.array_equal(a, b)

        return (
            self.domain == other.domain
            and same(self.features, other.features)
            and same(self.labels, other.labels)
            and same(self.protected, other.protected)
        )
