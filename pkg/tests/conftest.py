import numpy as np
import pytest

from datasets.CovariateShift import CovariateShiftSpec, generate_covariate_shift
from datasets.FactorModel import FactorModelSpec
from datasets.base import Dataset
from datasets.regression import RegressionFunction
from models.graph import build_graph
from models.kernels import KernelSpec


@pytest.fixture(autouse=True)
def isolated_outputs(monkeypatch):
    monkeypatch.setenv("WANDB_MODE", "disabled")
    monkeypatch.delenv("FAIRSHIFT_OUTPUT_ROOT", raising=False)


@pytest.fixture
def shift_spec():
    return CovariateShiftSpec(
        regression_fn=RegressionFunction(kind="sine"),
        source_mean=[0.0], source_cov=[[1.0]],
        target_mean=[1.0], target_cov=[[1.0]],
        seed=7,
    )


@pytest.fixture
def shift_data(shift_spec):
    return generate_covariate_shift(shift_spec, 30, 25)


@pytest.fixture
def graph(shift_data):
    source, target = shift_data
    return build_graph(source, target.without_labels(), KernelSpec())


@pytest.fixture
def random_graph():
    rng = np.random.default_rng(3)
    source = Dataset(rng.normal(size=(8, 2)))
    target = Dataset(rng.normal(1.0, 1.0, size=(7, 2)))
    return build_graph(source, target, KernelSpec(bandwidth=1.5))


@pytest.fixture
def factor_spec():
    return FactorModelSpec(
        loading=[[0.1, 0.0], [0.0, 0.1], [0.0, 0.0], [0.0, 0.0]],
        protected_direction=[0.0, 0.0, 1.0, 0.0],
        noise_sd=0.1,
        u_mean=[0.0, 0.0], u_cov=[[1.0, 0.0], [0.0, 1.0]],
        label_weights=[1.0, 1.0], protected_effect=1.0,
        seed=11,
    )
