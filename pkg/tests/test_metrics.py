import numpy as np
import pytest

from datasets.base import Dataset
from models.__base import ModelSpec
from models.kernels import MetricSpec
from utils.agent_utils import get_net
from utils.exceptions import ValidationError
from utils.metrics import (
    MetricsModule,
    balanced_accuracy,
    empirical_if_lipschitz,
    group_tnr,
    linear_lipschitz_certificate,
    worst_per_group_accuracy,
)


def test_balanced_accuracy_of_a_constant_predictor():
    report = balanced_accuracy([1, 1, 1, 1], [0, 1, 1, 1])
    assert report.name == "balanced_accuracy"
    assert report.value == pytest.approx(0.5)


def test_balanced_accuracy_weights_classes_equally():
    # recall 1.0 on class 1, 0.5 on class 0
    assert balanced_accuracy([0, 1, 1, 1], [0, 0, 1, 1]).value == pytest.approx(0.75)


def test_balanced_accuracy_needs_both_classes():
    with pytest.raises(ValidationError):
        balanced_accuracy([1, 0], [1, 1])


def test_balanced_accuracy_rejects_non_binary():
    with pytest.raises(ValidationError):
        balanced_accuracy([2, 0], [1, 0])


def test_group_tnr():
    predictions = [0, 0, 1, 1, 1, 1]
    labels = [0, 0, 1, 0, 0, 1]
    groups = ["a", "a", "a", "b", "b", "b"]
    report = group_tnr(predictions, labels, groups)
    assert report.value == pytest.approx(0.5)
    assert report.group_values == {"a": 1.0, "b": 0.0}


def test_group_tnr_needs_negatives():
    with pytest.raises(ValidationError):
        group_tnr([0, 1], [0, 1], ["a", "b"])


def test_worst_per_group_accuracy():
    # correct counts per (class, group) cell of ten: (0, g0) 8, (0, g1) 6, (1, g0) 7, (1, g1) 9
    cells = [(0, "g0", 8), (0, "g1", 6), (1, "g0", 7), (1, "g1", 9)]
    predictions, labels, classes, groups = [], [], [], []
    for cls, group, correct in cells:
        for k in range(10):
            labels.append(cls)
            predictions.append(cls if k < correct else 1 - cls)
            classes.append(cls)
            groups.append(group)
    report = worst_per_group_accuracy(predictions, labels, classes, groups)
    assert report.value == pytest.approx(0.65)
    assert report.group_values == pytest.approx({"0": 0.6, "1": 0.7})


def test_worst_per_group_accuracy_empty_cell():
    with pytest.raises(ValidationError):
        worst_per_group_accuracy([0, 1, 1], [0, 1, 1], [0, 1, 1], ["a", "a", "b"])


def test_metric_length_mismatch():
    with pytest.raises(ValidationError):
        group_tnr([0, 1], [0, 1, 0], ["a", "a"])


def test_linear_certificate():
    w = np.array([3.0, 4.0])
    assert linear_lipschitz_certificate(w, MetricSpec()) == pytest.approx(5.0)
    fair = MetricSpec.projecting_out([[0.0, 1.0]])
    assert linear_lipschitz_certificate(w, fair) == float("inf")
    assert linear_lipschitz_certificate(np.array([3.0, 0.0]), fair) == pytest.approx(3.0)


def _model(weights):
    return get_net(ModelSpec(), len(weights)).set_weights(np.append(weights, 0.7))


def test_empirical_lipschitz_is_below_the_certificate():
    data = Dataset(np.random.default_rng(0).normal(size=(50, 2)))
    report = empirical_if_lipschitz(_model([3.0, 4.0]), data, MetricSpec(), pairs=500, seed=1)
    assert report.value <= 5.0 + 1e-9
    assert report.value > 3.0
    assert report.group_values["linear_certificate"] == pytest.approx(5.0)


def test_flip_pairs_sit_at_zero_fair_distance():
    rng = np.random.default_rng(1)
    z = rng.integers(0, 2, size=40)
    X = np.column_stack([rng.normal(size=40), z.astype(float)])
    data = Dataset(X, protected=z)
    fair = MetricSpec.projecting_out([[0.0, 1.0]])
    blind = empirical_if_lipschitz(_model([1.0, 0.0]), data, fair, pairs=100, seed=2, flip_direction=[0.0, 1.0])
    assert blind.group_values["zero_distance_pairs"] >= 100
    assert blind.group_values["zero_distance_consistent"] == 1.0
    reading_z = empirical_if_lipschitz(_model([1.0, 2.0]), data, fair, pairs=100, seed=2, flip_direction=[0.0, 1.0])
    assert reading_z.group_values["zero_distance_consistent"] == 0.0
    assert reading_z.group_values["zero_distance_max_gap"] == pytest.approx(2.0)
    assert reading_z.group_values["linear_certificate"] == float("inf")


def test_metrics_module_collects_reports():
    module = MetricsModule()
    module.update_metrics(balanced_accuracy([1, 0], [1, 0]))
    module.update_metrics(group_tnr([0, 0], [0, 0], ["a", "b"]))
    payload = module.to_dict()
    assert list(payload) == ["balanced_accuracy", "group_tnr"]
    assert payload["group_tnr"]["group_values"] == {"a": 1.0, "b": 1.0}
    module.log_metrics("test")
