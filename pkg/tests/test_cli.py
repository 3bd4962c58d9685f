import json

import numpy as np
import pandas as pd
import pytest
from pytorch_lightning import LightningDataModule
from pytorch_lightning.callbacks import Callback as LightningCallback

from agents import REGISTRY
from config.hparams import EXPERIMENTS, ExperimentConfig
from datasets.CovariateShift import CovariateShiftSpec
from datasets.regression import RegressionFunction
from main import EXIT_FAILED, EXIT_INVALID, EXIT_NUMERIC, EXIT_OK, main
from utils.agent_utils import get_agent, get_datamodule
from utils.callbacks import Callback, LogBoundReportCallback, LogFitCallback, LogMetricsCallback
from utils.exceptions import ConfigError
from utils.io import read_json

DATA = {
    "regression_fn": {"kind": "sine"},
    "source_mean": [0.0], "source_cov": [[1.0]],
    "target_mean": [1.0], "target_cov": [[1.0]],
}


def _config(tmp_path, experiment, name="config.json", **overrides):
    payload = {
        "hparams": {"experiment": experiment, "seeds": [0], "output_dir": str(tmp_path / "out"),
                    "n_source": 20, "n_target": 15},
        "data": DATA,
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(payload.get(key), dict):
            payload[key] = {**payload[key], **value}
        else:
            payload[key] = value
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


def test_transductive_run_writes_its_files(tmp_path):
    assert main(["run", str(_config(tmp_path, "transductive_t1"))]) == EXIT_OK
    out = tmp_path / "out"
    for name in ("data_source.csv", "data_target.csv", "model.json", "bound_t1.json", "summary.csv"):
        assert (out / name).is_file(), name
    report = read_json(out / "bound_t1.json")
    assert report["theorem"] == "T1" and report["holds"] is True
    summary = pd.read_csv(out / "summary.csv")
    assert len(summary) == 1 and summary.loc[0, "converged"]


def test_runs_are_reproducible(tmp_path):
    first = _config(tmp_path, "transductive_t1", "a.json", hparams={"output_dir": str(tmp_path / "a")})
    second = _config(tmp_path, "transductive_t1", "b.json", hparams={"output_dir": str(tmp_path / "b")})
    assert main(["run", str(first)]) == EXIT_OK
    assert main(["run", str(second)]) == EXIT_OK
    for name in ("bound_t1.json", "model.json", "data_source.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_several_seeds_get_their_own_directories(tmp_path):
    path = _config(tmp_path, "transductive_t1", hparams={"seeds": [3, 4]})
    assert main(["run", str(path)]) == EXIT_OK
    out = tmp_path / "out"
    assert (out / "seed_3" / "bound_t1.json").is_file()
    assert (out / "seed_4" / "bound_t1.json").is_file()
    assert sorted(pd.read_csv(out / "summary.csv")["seed"]) == [3, 4]


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("FAIRSHIFT_OUTPUT_ROOT", str(tmp_path / "root"))
    path = _config(tmp_path, "transductive_t1", hparams={"output_dir": "relative"})
    assert main(["run", str(path)]) == EXIT_OK
    assert (tmp_path / "root" / "relative" / "bound_t1.json").is_file()


def test_sweep_rows(tmp_path):
    path = _config(tmp_path, "erm_vs_if_sweep", solver={"lambdas": [0.0, 0.1, 1.0]})
    assert main(["run", str(path)]) == EXIT_OK
    out = tmp_path / "out"
    summary = pd.read_csv(out / "summary.csv", keep_default_na=False)
    assert list(summary["lambda"]) == [0.0, 0.1, 1.0]
    for column in ("target_mse_erm", "target_mse_regularized", "target_mse_iw", "bound_lhs", "bound_rhs"):
        assert column in summary.columns
    # lambda = 0 has no usable constants
    assert summary.loc[0, "degenerate"] in (True, "True")
    assert summary.loc[0, "holds"] == ""
    for name in ("model_erm.json", "model_iw.json", "model_lambda2.json", "bound_t1_lambda1.json"):
        assert (out / name).is_file()


def test_inductive_and_general_shift_runs(tmp_path):
    inductive = _config(tmp_path, "inductive_t2", "t2.json", hparams={"output_dir": str(tmp_path / "t2")},
                        bounds={"mc_n": 2000})
    assert main(["run", str(inductive)]) == EXIT_OK
    assert read_json(tmp_path / "t2" / "bound_t2.json")["theorem"] == "T2"

    general = _config(tmp_path, "general_shift_t5", "t5.json", hparams={"output_dir": str(tmp_path / "t5")},
                      data={"target_regression_fn": {"kind": "sine", "scale": 2.0}}, bounds={"mc_n": 2000})
    assert main(["run", str(general)]) == EXIT_OK
    assert read_json(tmp_path / "t5" / "bound_t5.json")["theorem"] == "T5"


def test_domain_generalization_run(tmp_path):
    path = _config(tmp_path, "domgen_t3", adversary={"budget": 0.2, "steps": 5, "outer_steps": 2},
                   bounds={"n_adversaries": 10, "lipschitz_pairs": 50})
    assert main(["run", str(path)]) == EXIT_OK
    out = tmp_path / "out"
    assert read_json(out / "bound_t3.json")["theorem"] == "T3"
    assert "empirical_if_lipschitz" in read_json(out / "metrics.json")


@pytest.mark.slow
def test_alignment_run(tmp_path):
    factor = {
        "loading": [[0.1, 0.0], [0.0, 0.1], [0.0, 0.0], [0.0, 0.0]],
        "protected_direction": [0.0, 0.0, 1.0, 0.0],
        "u_mean": [0.0, 0.0], "u_cov": [[1.0, 0.0], [0.0, 1.0]],
        "label_weights": [1.0, 1.0], "protected_effect": 1.0,
    }
    path = _config(tmp_path, "alignment_t4", data=None, factor=factor, sinkhorn={"blur": 1.0},
                   hparams={"n_target": 100},
                   bounds={"alignment_q": 2, "alignment_steps": 20, "alignment_max_points": 80, "lipschitz_pairs": 50})
    main(["run", str(path)])
    out = tmp_path / "out"
    for name in ("data_factor.csv", "alignment.json", "trace.csv", "bound_t4.json", "metrics.json", "summary.csv"):
        assert (out / name).is_file(), name
    metrics = read_json(out / "metrics.json")
    assert {"prediction_consistency_raw", "prediction_consistency_aligned"} <= set(metrics)


def test_unknown_key_is_rejected(tmp_path):
    path = _config(tmp_path, "transductive_t1", kernel={"bandwith": 1.0})
    assert main(["run", str(path)]) == EXIT_INVALID


def test_missing_config_file(tmp_path):
    assert main(["run", str(tmp_path / "nope.json")]) == EXIT_INVALID


@pytest.mark.parametrize("hparams", [{"seeds": [-1]}, {"seeds": [1, 1]}, {"seeds": []}, {"n_source": 0}])
def test_bad_hparams(tmp_path, hparams):
    assert main(["run", str(_config(tmp_path, "transductive_t1", hparams=hparams))]) == EXIT_INVALID


def test_experiment_needs_its_sections(tmp_path):
    assert main(["run", str(_config(tmp_path, "domgen_t3"))]) == EXIT_INVALID


def test_config_errors_name_the_field():
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_json_dict({"hparams": {"n_source": "many"}})
    assert err.value.field_path == "hparams.n_source"
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_json_dict({"hparams": {"experiment": "transductive_t1"}, "data": {**DATA, "colour": 1}})
    assert err.value.field_path == "data.colour"


def test_config_builds_nested_sections():
    config = ExperimentConfig.from_json_dict({
        "hparams": {"experiment": "transductive_t1", "seeds": [3, 4]},
        "data": DATA,
        "kernel": {"bandwidth": 2, "metric": {}},
        "bounds": {"alignment_max_points": None},
    })
    assert isinstance(config.data, CovariateShiftSpec)
    assert isinstance(config.data.regression_fn, RegressionFunction)
    assert config.data.regression_fn.kind == "sine"
    assert config.kernel.bandwidth == 2.0
    assert config.bounds.alignment_max_points is None
    assert config.hparams.seeds == [3, 4]
    assert config.adversary is None


@pytest.mark.parametrize("payload, field_path", [
    ({"data": {**DATA, "regression_fn": {"kind": "sine", "scale": "big"}}}, "data.regression_fn.scale"),
    ({"data": {**DATA, "source_cov": [[1.0, "x"]]}}, "data.source_cov[0][1]"),
    ({"kernel": {"metric": {"shape": 1}}}, "kernel.metric.shape"),
    ({"hparams": {"seeds": [0, True]}}, "hparams.seeds[1]"),
    ({"solver": []}, "solver"),
])
def test_nested_config_errors_name_the_field(payload, field_path):
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_json_dict(payload)
    assert err.value.field_path == field_path


def test_every_experiment_has_one_agent():
    assert set(REGISTRY) == set(EXPERIMENTS)
    assert get_agent("domgen_t3").experiment == "domgen_t3"
    with pytest.raises(KeyError):
        get_agent("unknown")


def test_datamodules_are_lightning_datamodules(tmp_path):
    config = ExperimentConfig.from_json_dict({"hparams": {"experiment": "transductive_t1", "n_source": 12,
                                                          "n_target": 9}, "data": DATA})
    dm = get_datamodule("CovariateShiftDataModule", config, 0)
    assert isinstance(dm, LightningDataModule)
    assert dm.setup() is dm
    assert (dm.source.n, dm.target.n) == (12, 9)
    dm.prepare_data(str(tmp_path))
    assert (tmp_path / "data_source.csv").is_file() and (tmp_path / "data_target.csv").is_file()


def test_callbacks_are_lightning_callbacks():
    for callback in (Callback(), LogFitCallback(), LogBoundReportCallback(), LogMetricsCallback()):
        assert isinstance(callback, LightningCallback)


def test_singular_fit_exits_with_a_numeric_error(tmp_path):
    data = {"source_mean": [0.0, 0.0], "source_cov": [[1.0, 0.0], [0.0, 0.0]],
            "target_mean": [1.0, 0.0], "target_cov": [[1.0, 0.0], [0.0, 0.0]]}
    path = _config(tmp_path, "transductive_t1", data=data)
    assert main(["run", str(path)]) == EXIT_NUMERIC
    summary = pd.read_csv(tmp_path / "out" / "summary.csv")
    assert "solver" in summary.loc[0, "numeric_error"]


def test_gen_data(tmp_path):
    assert main(["gen-data", str(_config(tmp_path, "transductive_t1"))]) == EXIT_OK
    out = tmp_path / "out"
    assert (out / "data_source.csv").is_file()
    laplacian = pd.read_csv(out / "graph_laplacian.csv")
    assert laplacian.shape == (35, 35)
    np.testing.assert_allclose(laplacian.to_numpy().sum(axis=1), 0.0, atol=1e-12)
    assert not (out / "bound_t1.json").exists()


def test_report_aggregates(tmp_path, capsys):
    assert main(["run", str(_config(tmp_path, "transductive_t1", hparams={"seeds": [0, 1]}))]) == EXIT_OK
    assert main(["report", str(tmp_path / "out")]) == EXIT_OK
    assert "T1" in capsys.readouterr().out


def test_report_flags_a_failed_bound(tmp_path):
    failed = {"theorem": "T1", "lhs": 2.0, "rhs_terms": {"a": 1.0}, "constants": {}, "holds": False,
              "slack": -1.0, "degenerate": False, "tolerance": 0.0, "seeds": [0], "notes": []}
    (tmp_path / "bound_t1.json").write_text(json.dumps(failed))
    assert main(["report", str(tmp_path)]) == EXIT_FAILED


def test_report_on_a_missing_directory(tmp_path):
    assert main(["report", str(tmp_path / "missing")]) == EXIT_INVALID
