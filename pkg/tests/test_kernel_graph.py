import numpy as np
import pytest

from datasets.base import Dataset
from models.graph import LaplacianGraph, build_graph
from models.kernels import KernelSpec, MetricSpec, gram_matrix, kernel_value, paired_kernel
from utils.exceptions import ConfigError, ValidationError


def test_gram_matrix_properties():
    X = np.random.default_rng(0).normal(size=(12, 3))
    for family in ("rbf", "laplace"):
        K = gram_matrix(KernelSpec(family=family, bandwidth=0.7), X, X)
        np.testing.assert_allclose(K, K.T)
        np.testing.assert_allclose(np.diag(K), 1.0)
        assert np.all(K > 0) and np.all(K <= 1.0)


def test_rbf_value():
    assert kernel_value(KernelSpec(bandwidth=2.0), [0.0, 0.0], [3.0, 4.0]) == pytest.approx(np.exp(-25.0 / 8.0))


def test_laplace_value():
    assert kernel_value(KernelSpec(family="laplace", bandwidth=2.0), [0.0, 0.0], [3.0, 4.0]) == pytest.approx(np.exp(-2.5))


def test_unit_kernel():
    X = np.zeros((3, 2))
    np.testing.assert_array_equal(gram_matrix(KernelSpec(unit=True), X, X + 10), np.ones((3, 3)))


def test_paired_kernel_is_the_diagonal():
    rng = np.random.default_rng(1)
    X, Y = rng.normal(size=(6, 2)), rng.normal(size=(6, 2))
    kernel = KernelSpec(bandwidth=1.3)
    np.testing.assert_allclose(paired_kernel(kernel, X, Y), np.diag(gram_matrix(kernel, X, Y)))


def test_fair_metric_ignores_projected_direction():
    metric = MetricSpec.projecting_out([[0.0, 1.0]])
    metric.validate(p=2)
    assert metric.distance(np.array([[0.0, 0.0]]), np.array([[0.0, 5.0]]))[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert metric.distance(np.array([[0.0, 0.0]]), np.array([[3.0, 5.0]]))[0, 0] == pytest.approx(3.0)
    kernel = KernelSpec(metric=metric)
    assert kernel_value(kernel, [1.0, -4.0], [1.0, 4.0]) == pytest.approx(1.0)


@pytest.mark.parametrize("projection", [
    [[1.0, 1.0], [0.0, 1.0]],      # not symmetric
    [[2.0, 0.0], [0.0, 0.0]],      # not idempotent
    [[1.0, 0.0, 0.0]],             # not square
])
def test_bad_projection(projection):
    with pytest.raises(ConfigError):
        MetricSpec(kind="fair_projection", projection=projection).validate()


def test_kernel_spec_validation():
    with pytest.raises(ConfigError) as err:
        KernelSpec(bandwidth=0.0).validate()
    assert err.value.field_path == "kernel.bandwidth"


def test_laplacian_structure(graph):
    L = graph.laplacian
    np.testing.assert_allclose(L.sum(axis=1), 0.0, atol=1e-12)
    np.testing.assert_allclose(L, L.T)
    np.testing.assert_allclose(np.diag(L), graph.degrees - np.diag(graph.kernel_matrix))
    assert np.linalg.eigvalsh(L)[0] >= -1e-10


def test_regularizer_constants_match_dense_eigenvalues(graph):
    assert graph.L_R == pytest.approx(np.linalg.eigvalsh(graph.laplacian)[-1], rel=1e-10)
    assert graph.mu_R == pytest.approx(np.linalg.eigvalsh(graph.L_TT)[0], rel=1e-8)
    assert graph.mu_R > 0 and not graph.disconnected


def test_blocks(graph):
    n_s = graph.n_source
    np.testing.assert_array_equal(graph.L_ST, graph.laplacian[:n_s, n_s:])
    np.testing.assert_array_equal(graph.L_TS, graph.L_ST.T)
    assert graph.L_TT.shape == (graph.n_target, graph.n_target)


def test_graph_is_immutable(graph):
    with pytest.raises(ValueError):
        graph.laplacian[0, 0] = 1.0


def test_disconnected_graph():
    K = np.kron(np.eye(2), np.ones((2, 2)))
    graph = LaplacianGraph.from_kernel_matrix(K, 2, 2)
    assert graph.disconnected


def test_rejects_negative_weights():
    with pytest.raises(ValidationError):
        LaplacianGraph.from_kernel_matrix(-np.ones((3, 3)), 2, 1)


def test_rejects_dimension_mismatch():
    with pytest.raises(ValidationError):
        build_graph(Dataset(np.zeros((3, 1))), Dataset(np.zeros((3, 2))), KernelSpec())


def test_laplacian_csv(tmp_path, random_graph):
    random_graph.save_csv(tmp_path / "L.csv")
    lines = (tmp_path / "L.csv").read_text().splitlines()
    assert lines[0] == ",".join(f"n{j + 1}" for j in range(random_graph.n))
    assert len(lines) == random_graph.n + 1
