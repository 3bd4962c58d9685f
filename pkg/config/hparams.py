import json
import typing
from dataclasses import dataclass, field, fields, is_dataclass
from typing import Any, List, Optional

import numpy as np
from simple_parsing.helpers import Serializable, choice, list_field

from datasets.CovariateShift import CovariateShiftSpec
from datasets.FactorModel import FactorModelSpec
from models.__base import ModelSpec
from models.kernels import KernelSpec
from models.losses.adversarial import AdversaryConfig
from models.losses.sinkhorn import SinkhornConfig
from utils.exceptions import ConfigError

"""Dataclass configuration of an experiment.

A config file is one JSON document whose top-level keys are the fields of
ExperimentConfig. Unknown keys and ill-typed values are rejected with the
dotted path of the offending field. Each field can be preceded by a comment,
which describes it in `main.py --help`.
"""

EXPERIMENTS = ("transductive_t1", "inductive_t2", "domgen_t3", "general_shift_t5", "alignment_t4", "erm_vs_if_sweep")
MAX_SEED = 2 ** 64


@dataclass
class Hparams(Serializable):
    """Run-level options"""

    # ----------------------
    # Experiment
    # ----------------------
    experiment    : str           = choice(*EXPERIMENTS, default="transductive_t1")
    seeds         : List[int]     = list_field(0)    # one job per seed, 64-bit unsigned
    output_dir    : str           = "outputs"        # relative paths resolve under $FAIRSHIFT_OUTPUT_ROOT
    n_source      : int           = 50               # labeled source rows
    n_target      : int           = 50               # unlabeled target rows (rows per group for alignment_t4)
    n_jobs        : int           = 1                # joblib workers over seeds, -1 for all cores

    # ----------------------
    # Wandb Parameters
    # ----------------------
    wandb_mode    : str           = choice("disabled", "offline", "online", default="disabled")
    wandb_project : str           = "fairshift"      # name of the project
    wandb_entity  : Optional[str] = None             # name of the wandb entity


@dataclass
class SolverParams(Serializable):
    """Model class and regularization strengths"""

    model           : ModelSpec       = field(default_factory=ModelSpec)
    lambdas         : List[float]     = list_field(1.0)   # one fit per value; a sweep when several
    importance_clip : Optional[float] = 100.0             # cap on dQ/dP for the importance-weighted baseline


@dataclass
class BoundParams(Serializable):
    """Sizes of the bound and metric evaluations"""

    mc_n                 : int           = 20000   # Monte Carlo draws per law for population bounds
    n_adversaries        : int           = 200     # sampled transport maps for the domain generalization bound
    lipschitz_pairs      : int           = 1000    # pairs sampled by the empirical IF-Lipschitz metric
    alignment_q          : int           = 1       # representation dimension
    alignment_steps      : int           = 200
    alignment_step_size  : float         = 0.1
    alignment_penalty    : float         = 1.0     # weight of ||Phi Phi' - I||_F^2
    alignment_max_points : Optional[int] = 500     # rows per group used while fitting Phi
    z_balance            : float         = 0.5     # P(Z = 1) in factor-model draws


@dataclass
class ExperimentConfig(Serializable):
    """base options."""

    hparams   : Hparams                      = field(default_factory=Hparams)
    data      : Optional[CovariateShiftSpec] = None
    factor    : Optional[FactorModelSpec]    = None
    kernel    : KernelSpec                   = field(default_factory=KernelSpec)
    solver    : SolverParams                 = field(default_factory=SolverParams)
    adversary : Optional[AdversaryConfig]    = None
    sinkhorn  : Optional[SinkhornConfig]     = None
    bounds    : BoundParams                  = field(default_factory=BoundParams)

    def validate(self) -> "ExperimentConfig":
        hp = self.hparams
        if hp.experiment not in EXPERIMENTS:
            raise ConfigError("hparams.experiment", f"must be one of {EXPERIMENTS}, got {hp.experiment!r}")
        if not hp.seeds:
            raise ConfigError("hparams.seeds", "at least one seed is required")
        for i, seed in enumerate(hp.seeds):
            if not 0 <= seed < MAX_SEED:
                raise ConfigError(f"hparams.seeds[{i}]", f"must be a 64-bit unsigned integer, got {seed}")
        if len(set(hp.seeds)) != len(hp.seeds):
            raise ConfigError("hparams.seeds", "seeds must be distinct")
        if hp.n_source < 1 or hp.n_target < 1:
            raise ConfigError("hparams.n_source" if hp.n_source < 1 else "hparams.n_target", "must be >= 1")
        if hp.n_jobs == 0:
            raise ConfigError("hparams.n_jobs", "must be nonzero")

        required = {
            "transductive_t1": ("data",),
            "inductive_t2": ("data",),
            "domgen_t3": ("data", "adversary"),
            "general_shift_t5": ("data",),
            "alignment_t4": ("factor", "sinkhorn"),
            "erm_vs_if_sweep": ("data",),
        }[hp.experiment]
        for name in required:
            if getattr(self, name) is None:
                raise ConfigError(name, f"required by experiment {hp.experiment!r}")

        if self.data is not None:
            self.data.validate("data")
            self.kernel.validate("kernel", self.data.p)
        else:
            self.kernel.validate("kernel")
        if self.factor is not None:
            self.factor.validate("factor")
        if self.adversary is not None:
            self.adversary.validate("adversary")
        if self.sinkhorn is not None:
            self.sinkhorn.validate("sinkhorn")
        self.solver.model.validate("solver.model")
        if hp.experiment == "domgen_t3" and self.solver.model.feature_map == "step":
            raise ConfigError("solver.model.feature_map", "the adversarial fit needs a differentiable model")
        if not self.solver.lambdas:
            raise ConfigError("solver.lambdas", "at least one value is required")
        for i, lam in enumerate(self.solver.lambdas):
            if not np.isfinite(lam) or lam < 0:
                raise ConfigError(f"solver.lambdas[{i}]", f"must be a finite value >= 0, got {lam}")
        if self.solver.importance_clip is not None and not self.solver.importance_clip > 0:
            raise ConfigError("solver.importance_clip", "must be > 0")

        b = self.bounds
        if b.mc_n < 1000:
            raise ConfigError("bounds.mc_n", "must be >= 1000")
        if b.n_adversaries < 1:
            raise ConfigError("bounds.n_adversaries", "must be >= 1")
        if b.lipschitz_pairs < 1:
            raise ConfigError("bounds.lipschitz_pairs", "must be >= 1")
        if not 0.0 < b.z_balance < 1.0:
            raise ConfigError("bounds.z_balance", "must lie in (0, 1)")
        if self.factor is not None and not 0 < b.alignment_q < self.factor.p:
            raise ConfigError("bounds.alignment_q", f"must satisfy 0 < q < p = {self.factor.p}")
        if b.alignment_steps < 0 or not b.alignment_step_size > 0 or b.alignment_penalty < 0:
            raise ConfigError("bounds.alignment_steps", "steps >= 0, step_size > 0 and penalty >= 0 are required")
        return self

    @classmethod
    def from_json_dict(cls, payload: Any) -> "ExperimentConfig":
        check_payload(cls, payload)
        try:
            config = cls.from_dict(payload, drop_extra_fields=False)
        except (TypeError, ValueError, KeyError) as err:
            raise ConfigError("<root>", str(err))
        return config.validate()

    @classmethod
    def load_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                payload = json.load(fh)
        except FileNotFoundError:
            raise ConfigError("<file>", f"{path} does not exist")
        except json.JSONDecodeError as err:
            raise ConfigError("<file>", f"invalid JSON at line {err.lineno}: {err.msg}")
        return cls.from_json_dict(payload)


@dataclass
class VerifyOptions:
    """Options of the verification battery"""

    seeds      : int = 10              # seeds per check; directional checks need >= seeds - seeds // 10 passes
    output_dir : str = "verify_all"    # relative paths resolve under $FAIRSHIFT_OUTPUT_ROOT
    n_jobs     : int = 1               # joblib workers over seeds


def _join(path: str, name: str) -> str:
    return f"{path}.{name}" if path else name


SCALARS = {bool: "a boolean", int: "an integer", float: "a number", str: "a string"}


def _is_scalar(value: Any, tp: type) -> bool:
    if tp is bool:
        return isinstance(value, bool)
    if isinstance(value, bool):
        return False
    if tp is float:
        return isinstance(value, (int, float))
    return isinstance(value, tp)


def _check_value(value: Any, tp: Any, path: str) -> None:
    args = typing.get_args(tp)
    if typing.get_origin(tp) is typing.Union:
        if value is None and type(None) in args:
            return
        tp = next(a for a in args if a is not type(None))
        args = typing.get_args(tp)
    if is_dataclass(tp):
        check_payload(tp, value, path)
    elif typing.get_origin(tp) is list:
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {type(value).__name__}")
        for i, item in enumerate(value):
            _check_value(item, args[0] if args else Any, f"{path}[{i}]")
    elif tp in SCALARS and not _is_scalar(value, tp):
        raise ConfigError(path, f"expected {SCALARS[tp]}, got {value!r}")


def check_payload(cls, payload: Any, path: str = "") -> None:
    """Reject unknown keys and ill-typed leaves of a JSON object meant for dataclass ``cls``."""
    if not isinstance(payload, dict):
        raise ConfigError(path or "<root>", f"expected an object, got {type(payload).__name__}")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls) if f.init}
    for key, value in payload.items():
        if key not in known:
            raise ConfigError(_join(path, key), "unknown key")
        _check_value(value, hints[key], _join(path, key))
