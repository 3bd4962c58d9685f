import numpy as np
import pytest
import torch

from datasets.base import Dataset, Domain
from datasets.regression import RegressionFunction
from models.__base import ModelSpec
from models.kernels import KernelSpec
from models.losses.adversarial import (
    AdversarialObjective,
    AdversaryConfig,
    adversarial_path,
    adversarial_regularizer,
    as_torch_fn,
    mean_norm,
    project_budget,
    random_displacements,
    transport_value,
)
from models.losses.gradcheck import regularizer_gradient_check
from models.losses.laplacian import (
    cross_domain_regularizer,
    laplacian_regularizer,
    pairwise_laplacian_regularizer,
    split_regularizer,
)
from models.losses.population import population_kernel_regularizer, second_derivative, target_kernel_mass
from models.losses.quadratic import QuadraticLoss, mean_risk, quadratic_loss, quadratic_loss_grad
from models.losses.sinkhorn import SinkhornConfig, sinkhorn_divergence
from utils.agent_utils import get_net
from utils.exceptions import ConfigError, NumericError, UnsupportedOperationError, ValidationError
from utils.seeding import make_rng


def test_laplacian_forms_agree(random_graph):
    f = np.random.default_rng(0).normal(size=random_graph.n)
    value = laplacian_regularizer(random_graph, f).value
    assert value == pytest.approx(pairwise_laplacian_regularizer(random_graph, f), rel=1e-12)
    assert value == pytest.approx(split_regularizer(random_graph, f[:8], f[8:]), rel=1e-12)


def test_constant_outputs_cost_nothing(random_graph):
    reg = laplacian_regularizer(random_graph, np.full(random_graph.n, 3.0))
    assert reg.value == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(reg.gradient, 0.0, atol=1e-13)
    assert cross_domain_regularizer(random_graph, np.full(random_graph.n, 3.0)) == pytest.approx(0.0, abs=1e-14)


def test_laplacian_gradient(random_graph):
    f = np.random.default_rng(1).normal(size=random_graph.n)
    assert regularizer_gradient_check("laplacian", {"graph": random_graph, "outputs": f}) < 1e-6


def test_laplacian_length_mismatch(random_graph):
    with pytest.raises(ValidationError):
        laplacian_regularizer(random_graph, np.zeros(random_graph.n + 1))


def test_cross_domain_block(random_graph):
    f = np.random.default_rng(2).normal(size=random_graph.n)
    fs, ft = f[:8], f[8:]
    K = random_graph.kernel_matrix[:8, 8:]
    expected = sum(0.5 * K[i, j] * (fs[i] - ft[j]) ** 2 for i in range(8) for j in range(7)) / 56
    assert cross_domain_regularizer(random_graph, f) == pytest.approx(expected, rel=1e-12)


def _clouds(n_s, n_t, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(rng.normal(size=(n_s, 1)), domain=Domain.SOURCE), Dataset(rng.normal(1.0, 1.0, size=(n_t, 1)), domain=Domain.TARGET)


def test_population_regularizer_vanishes_on_constants():
    source, target = _clouds(50, 40)
    constant = RegressionFunction.constant(2.0)
    reg = population_kernel_regularizer(constant, constant, source, target, KernelSpec())
    assert reg.value == pytest.approx(0.0, abs=1e-14)
    assert not reg.flags["paired"]


def test_population_regularizer_switches_to_pairs():
    source, target = _clouds(50, 40)
    fn = RegressionFunction(kind="sine")
    full = population_kernel_regularizer(fn, fn, source, target, KernelSpec())
    paired = population_kernel_regularizer(fn, fn, source, target, KernelSpec(), max_pairs=100)
    assert paired.flags["paired"]
    assert paired.standard_error > 0
    assert abs(paired.value - full.value) < 5 * paired.standard_error + 1e-3


def test_second_derivative_uses_target_mass():
    source, target = _clouds(30, 20)
    kernel = KernelSpec()
    mass = target_kernel_mass(source, target, kernel)
    h = RegressionFunction(kind="linear")
    expected = np.mean(target.features[:, 0] ** 2 * mass)
    assert second_derivative(h, source, target, kernel) == pytest.approx(expected, rel=1e-12)
    assert np.all(mass > 0) and np.all(mass <= 1.0)


def test_second_derivative_matches_finite_differences():
    source, target = _clouds(30, 25, seed=2)
    kernel = KernelSpec()
    f = RegressionFunction(kind="sine")
    g = RegressionFunction(kind="linear", scale=0.5)
    h = RegressionFunction(kind="quadratic", scale=0.3, offset=0.2)

    def along(t):
        return population_kernel_regularizer(f, lambda X: g(X) + t * h(X), source, target, kernel).value

    t = 0.5
    curvature = (along(t) - 2.0 * along(0.0) + along(-t)) / t ** 2
    assert second_derivative(h, source, target, kernel) == pytest.approx(curvature, rel=1e-8)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_second_derivative_is_bounded_by_the_smallest_target_mass(seed):
    source, target = _clouds(40, 30, seed=seed)
    kernel = KernelSpec()
    floor = target_kernel_mass(source, target, kernel).min()
    w = np.random.default_rng(seed).normal(size=1).tolist()
    for h in (RegressionFunction(kind="linear", weights=w), RegressionFunction(kind="sine", weights=w, offset=0.3)):
        norm = np.mean(h(target.features) ** 2)
        assert second_derivative(h, source, target, kernel) >= floor * norm * (1 - 1e-12)


def test_quadratic_loss():
    a, b = np.array([1.0, 3.0]), np.array([0.0, 1.0])
    np.testing.assert_allclose(quadratic_loss(a, b), [0.5, 2.0])
    np.testing.assert_allclose(quadratic_loss_grad(a, b), [1.0, 2.0])
    assert mean_risk(a, b) == pytest.approx(1.25)
    assert float(QuadraticLoss()(torch.as_tensor(a), torch.as_tensor(b))) == pytest.approx(1.25)


def test_project_budget():
    delta = np.array([[3.0, 4.0], [0.0, 1.0]])
    projected = project_budget(delta, 1.5)
    assert mean_norm(projected) == pytest.approx(1.5)
    np.testing.assert_allclose(projected, delta * 0.5)
    np.testing.assert_array_equal(project_budget(delta, 10.0), delta)
    np.testing.assert_array_equal(project_budget(delta, 0.0), 0.0)


@pytest.mark.parametrize("concentrated", [False, True])
def test_random_displacements_on_budget(concentrated):
    delta = random_displacements(np.random.default_rng(0), 40, 3, 0.2, concentrated=concentrated)
    assert delta.shape == (40, 3)
    assert mean_norm(delta) == pytest.approx(0.2)


def _source(n=40, seed=0):
    return Dataset(np.random.default_rng(seed).normal(size=(n, 1)), np.zeros(n))


def test_adversarial_zero_budget_is_plain_gap():
    source = _source()
    f, g = RegressionFunction(kind="sine"), RegressionFunction(kind="linear")
    value, delta = adversarial_regularizer(f, g, source, AdversaryConfig(budget=0.0))
    assert value.flags["zero_budget"]
    np.testing.assert_array_equal(delta, 0.0)
    assert value.value == pytest.approx(transport_value(f, g, source.features, delta))


def test_adversary_respects_budget_and_beats_its_start():
    source = _source()
    fn = RegressionFunction(kind="sine", frequency=2.0)
    cfg = AdversaryConfig(budget=0.3, steps=30, step_size=0.05, seed=4)
    value, delta = adversarial_regularizer(fn, fn, source, cfg)
    assert mean_norm(delta) <= 0.3 + 1e-12
    start = random_displacements(make_rng(4), source.n, 1, 0.3)
    assert value.value >= transport_value(fn, fn, source.features, start) - 1e-12
    assert value.value > 0


def test_adversary_on_a_linear_model_moves_along_the_slope():
    source = _source()
    model = get_net(ModelSpec(), 1).set_weights(np.array([2.0, 0.0]))
    value, delta = adversarial_regularizer(model, model, source, AdversaryConfig(budget=0.5, steps=50, seed=1))
    # (w . delta_i)^2 averaged, maximal when all mass sits on one point; at least the uniform value
    assert value.value >= (2.0 * 0.5) ** 2 - 1e-9


@pytest.mark.parametrize("seed", [0, 3, 11])
def test_adversarial_path_grows_with_the_budget(seed):
    source = _source(seed=seed)
    fn = RegressionFunction(kind="sine", frequency=3.0)
    budgets = [0.0, 0.02, 0.05, 0.1, 0.2, 0.4]
    path = adversarial_path(fn, fn, source, AdversaryConfig(steps=10, step_size=0.05, seed=seed), budgets)
    values = [value.value for value, _ in path]
    assert values[0] == 0.0
    assert all(b >= a for a, b in zip(values, values[1:]))
    for budget, (_, delta) in zip(budgets, path):
        assert mean_norm(delta) <= budget + 1e-12


def test_adversarial_path_starts_like_a_single_call():
    source = _source()
    fn = RegressionFunction(kind="sine", frequency=2.0)
    cfg = AdversaryConfig(budget=0.3, steps=15, step_size=0.05, seed=4)
    single, _ = adversarial_regularizer(fn, fn, source, cfg)
    (first, _), = adversarial_path(fn, fn, source, cfg, [0.3])
    assert first.value >= single.value


def test_adversarial_path_needs_sorted_budgets():
    fn = RegressionFunction(kind="sine")
    with pytest.raises(ValidationError):
        adversarial_path(fn, fn, _source(), AdversaryConfig(), [0.2, 0.1])


def test_step_oracle_is_not_differentiable():
    with pytest.raises(UnsupportedOperationError):
        as_torch_fn(RegressionFunction(kind="step"))
    model = get_net(ModelSpec(family="FeatureMapLinear", feature_map="step"), 1)
    with pytest.raises(UnsupportedOperationError):
        as_torch_fn(model)


def test_adversarial_inner_gradient():
    rng = np.random.default_rng(5)
    objective = AdversarialObjective(rng.normal(size=10), RegressionFunction(kind="sine", weights=[1.0, 0.5]),
                                     rng.normal(size=(10, 2)))
    error = regularizer_gradient_check("adversarial_inner", {"objective": objective, "delta": 0.1 * rng.normal(size=(10, 2))})
    assert error < 1e-6


def test_adversary_config_validation():
    with pytest.raises(ConfigError) as err:
        AdversaryConfig(budget=-1.0).validate()
    assert err.value.field_path == "adversary.budget"


def test_sinkhorn_divergence_properties():
    rng = np.random.default_rng(6)
    xs, ys = rng.normal(size=(20, 2)), rng.normal(1.0, 1.0, size=(15, 2))
    cfg = SinkhornConfig(blur=0.5)
    forward = sinkhorn_divergence(xs, ys, cfg)
    assert forward > 0
    assert forward == pytest.approx(sinkhorn_divergence(ys, xs, cfg), abs=1e-7)
    assert sinkhorn_divergence(xs, xs, cfg) == pytest.approx(0.0, abs=1e-8)


def test_sinkhorn_small_blur_approaches_squared_distance():
    value = sinkhorn_divergence(np.zeros((1, 2)), np.array([[2.0, 0.0]]), SinkhornConfig(blur=0.02))
    assert value == pytest.approx(4.0, rel=0.05)


def test_sinkhorn_gradient():
    rng = np.random.default_rng(7)
    instance = {"xs": rng.normal(size=(8, 3)), "ys": rng.normal(0.5, 1.0, size=(6, 3)),
                "phi": rng.normal(size=(2, 3)), "cfg": SinkhornConfig(blur=1.0, max_iters=10000, tol=1e-12)}
    assert regularizer_gradient_check("sinkhorn", instance) < 1e-4


def test_sinkhorn_reports_non_convergence():
    rng = np.random.default_rng(8)
    with pytest.raises(NumericError):
        sinkhorn_divergence(rng.normal(size=(10, 2)), rng.normal(3.0, 1.0, size=(10, 2)),
                            SinkhornConfig(blur=0.1, max_iters=1, tol=1e-15))


def test_unknown_gradient_check():
    with pytest.raises(KeyError):
        regularizer_gradient_check("nope", {})
