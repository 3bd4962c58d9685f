import numpy as np
import pytest

from models.extrapolation import ExtrapolationSolver, extrapolate_closed_form, extrapolate_iterative
from models.graph import LaplacianGraph
from models.losses.laplacian import split_regularizer
from utils.exceptions import DisconnectedGraphError, NumericError, ValidationError


def test_solvers_agree(random_graph):
    v = np.random.default_rng(0).normal(size=random_graph.n_source)
    closed = extrapolate_closed_form(random_graph, v)
    iterative = extrapolate_iterative(random_graph, v)
    assert closed.solver == ExtrapolationSolver.CLOSED_FORM
    assert iterative.solver == ExtrapolationSolver.ITERATIVE
    np.testing.assert_allclose(closed.extended, iterative.extended, atol=1e-6)
    assert closed.residual <= 1e-8 * (1.0 + np.linalg.norm(v))
    assert closed.jitter_used == 0.0


def test_constants_extend_to_constants(random_graph):
    result = extrapolate_closed_form(random_graph, np.full(random_graph.n_source, -2.5))
    np.testing.assert_allclose(result.extended, -2.5, rtol=1e-10)


def test_extension_stays_within_source_range(random_graph):
    v = np.random.default_rng(1).normal(size=random_graph.n_source)
    t = extrapolate_closed_form(random_graph, v).extended
    assert np.all(t >= v.min() - 1e-10) and np.all(t <= v.max() + 1e-10)


def test_extension_minimizes_the_regularizer(random_graph):
    rng = np.random.default_rng(2)
    v = rng.normal(size=random_graph.n_source)
    t = extrapolate_closed_form(random_graph, v).extended
    best = split_regularizer(random_graph, v, t)
    for _ in range(20):
        assert split_regularizer(random_graph, v, t + 1e-2 * rng.normal(size=t.shape)) >= best - 1e-14


def test_extension_is_linear(random_graph):
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=random_graph.n_source), rng.normal(size=random_graph.n_source)
    ext = lambda v: extrapolate_closed_form(random_graph, v).extended
    np.testing.assert_allclose(ext(2.0 * a - b), 2.0 * ext(a) - ext(b), atol=1e-10)


def test_disconnected_graph_is_rejected():
    graph = LaplacianGraph.from_kernel_matrix(np.kron(np.eye(2), np.ones((2, 2))), 2, 2)
    for solve in (extrapolate_closed_form, extrapolate_iterative):
        with pytest.raises(DisconnectedGraphError) as err:
            solve(graph, np.ones(2))
        assert isinstance(err.value, NumericError)
        assert err.value.module == "extrapolation"


def test_input_validation(random_graph):
    with pytest.raises(ValidationError):
        extrapolate_closed_form(random_graph, np.ones(random_graph.n_source + 1))
    with pytest.raises(ValidationError):
        extrapolate_closed_form(random_graph, np.full(random_graph.n_source, np.inf))


def test_iteration_cap(random_graph):
    v = np.random.default_rng(4).normal(size=random_graph.n_source)
    with pytest.raises(NumericError):
        extrapolate_iterative(random_graph, v, max_iter=1)
