import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from datasets.base import Dataset
from theory.reports import BoundReport
from utils.callbacks import LogBoundReportCallback, LogFitCallback, LogMetricsCallback
from utils.exceptions import DegenerateConstantError, NumericError
from utils.io import resolve_output_dir, write_json
from utils.seeding import seed_everything


@dataclass
class SeedResult:
    seed          : int
    rows          : List[dict]      = field(default_factory=list)    # summary.csv rows
    reports       : Dict[str, object] = field(default_factory=dict)  # BoundReports by file stem
    fits          : Dict[str, object] = field(default_factory=dict)  # FitReports by file stem
    metrics       : Dict[str, object] = field(default_factory=dict)  # MetricReports by name
    numeric_error : Optional[str]   = None
    error_module  : Optional[str]   = None


@dataclass
class RunOutcome:
    results        : List[SeedResult]
    summary_path   : Path

    @property
    def numeric_errors(self) -> List[SeedResult]:
        return [r for r in self.results if r.numeric_error is not None]

    @property
    def failed_checks(self) -> List[str]:
        return [
            f"seed {r.seed}: {key}" for r in self.results for key, report in r.reports.items()
            if report.holds is False
        ]

    @property
    def exit_code(self) -> int:
        if self.numeric_errors:
            return 3
        return 1 if self.failed_checks else 0


def target_mse(model, target: Dataset) -> float:
    """Evaluation-only use of the held-out target labels."""
    return float(np.mean((model.predict(target.features) - target.labels) ** 2))


class BaseAgent:
    """Runs one experiment over every configured seed and writes its artifacts.

    Per-seed files go to ``output_dir`` for a single seed, else ``output_dir/seed_<s>``.
    The summary is written once by the coordinator after every seed finished.
    """

    experiment: Optional[str] = None
    datamodule: str = "CovariateShiftDataModule"

    def __init__(self, config) -> None:
        self.config = config
        self.hparams = config.hparams
        self.output_dir = resolve_output_dir(self.hparams.output_dir)
        self.callbacks = self.get_callbacks()

    def get_callbacks(self):
        return [LogFitCallback(), LogBoundReportCallback(), LogMetricsCallback()]

    def seed_dir(self, seed: int) -> Path:
        if len(self.hparams.seeds) == 1:
            return self.output_dir
        return self.output_dir / f"seed_{seed}"

    def suffix(self, index: int) -> str:
        return f"_lambda{index}" if len(self.config.solver.lambdas) > 1 else ""

    def run_seed(self, seed: int, out: Path) -> SeedResult:
        raise NotImplementedError

    @staticmethod
    def guarded(build, theorem: str, seed: int):
        """Degenerate constants still produce a report, with holds left undetermined."""
        try:
            report = build()
        except DegenerateConstantError as err:
            return BoundReport.degenerate_report(theorem, str(err), seeds=[seed])
        if not report.seeds:
            report.seeds = [int(seed)]
        return report

    def write_report(self, result: SeedResult, out: Path, stem: str, report) -> None:
        write_json(out / f"{stem}.json", report.to_dict())
        result.reports[stem] = report

    def _run_one(self, seed: int) -> SeedResult:
        seed_everything(seed)
        out = self.seed_dir(seed)
        out.mkdir(parents=True, exist_ok=True)
        try:
            return self.run_seed(seed, out)
        except NumericError as err:
            return SeedResult(seed, numeric_error=str(err), error_module=err.module)

    def run(self) -> RunOutcome:
        seeds = list(self.hparams.seeds)
        if self.hparams.n_jobs != 1:
            results = Parallel(n_jobs=self.hparams.n_jobs)(delayed(self._run_one)(seed) for seed in seeds)
        else:
            results = [self._run_one(seed) for seed in tqdm(seeds, desc=self.experiment, disable=len(seeds) == 1)]

        for result in results:
            for callback in self.callbacks:
                callback.on_seed_end(self, result)
        for callback in self.callbacks:
            callback.on_run_end(self, results)

        summary_path = self.output_dir / "summary.csv"
        self.write_summary(results, summary_path)
        return RunOutcome(results, summary_path)

    @staticmethod
    def write_summary(results: List[SeedResult], path: Path) -> None:
        rows = [row for result in results for row in result.rows]
        rows += [
            {"seed": r.seed, "numeric_error": r.numeric_error} for r in results if r.numeric_error is not None
        ]
        columns: List[str] = []
        for row in rows:
            columns += [key for key in row if key not in columns]
        frame = pd.DataFrame(rows, columns=columns or ["seed"])
        os.makedirs(path.parent, exist_ok=True)
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
