import wandb
from pytorch_lightning.callbacks import Callback as LightningCallback

from utils.metrics import MetricsModule


class Callback(LightningCallback):
    """Hooks called by the agent's coordinator once per finished seed."""

    def on_seed_end(self, agent, result) -> None:
        pass

    def on_run_end(self, agent, results) -> None:
        pass


class LogFitCallback(Callback):
    def on_seed_end(self, agent, result):
        if wandb.run is None:
            return
        for key, fit in result.fits.items():
            wandb.log({f"seed_{result.seed}/{key}/{name}": value for name, value in fit.to_dict().items()
                       if isinstance(value, (int, float))})


class LogBoundReportCallback(Callback):
    def on_seed_end(self, agent, result):
        if wandb.run is None:
            return
        for key, report in result.reports.items():
            wandb.log({
                f"seed_{result.seed}/{key}/lhs": report.lhs,
                f"seed_{result.seed}/{key}/rhs": report.rhs,
                f"seed_{result.seed}/{key}/slack": report.slack,
                f"seed_{result.seed}/{key}/holds": float(bool(report.holds)),
            })

    def on_run_end(self, agent, results):
        if wandb.run is None:
            return
        reports = [r for result in results for r in result.reports.values() if not r.degenerate]
        if reports:
            wandb.run.summary["bounds/fraction_holding"] = sum(bool(r.holds) for r in reports) / len(reports)


class LogMetricsCallback(Callback):
    def on_seed_end(self, agent, result):
        if not result.metrics:
            return
        metrics = MetricsModule()
        for report in result.metrics.values():
            metrics.update_metrics(report)
        metrics.log_metrics(f"seed_{result.seed}")
