from dataclasses import replace

from agents.BaseAgent import BaseAgent, SeedResult, target_mse
from datamodules.CovariateShiftDataModule import CovariateShiftDataModule
from models.optimizers.solver import fit_adversarial
from theory.bounds import theorem3_report
from utils.agent_utils import save_model
from utils.io import write_json
from utils.metrics import MetricsModule, empirical_if_lipschitz


class DomainGeneralizationAgent(BaseAgent):
    """Adversarially regularized fit on the source only, checked over the transport neighborhood."""

    experiment = "domgen_t3"

    def run_seed(self, seed, out):
        cfg = self.config
        result = SeedResult(seed)
        dm = CovariateShiftDataModule(cfg, seed).setup()
        dm.prepare_data(out)
        adversary = replace(cfg.adversary, seed=seed)
        metrics = MetricsModule()
        for i, lam in enumerate(cfg.solver.lambdas):
            suffix = self.suffix(i)
            model, fit = fit_adversarial(dm.source, cfg.solver.model, adversary, lam)
            save_model(model, out / f"model{suffix}.json")
            report = self.guarded(
                lambda: theorem3_report(model, dm.source, dm.spec.regression_fn, adversary, cfg.bounds.n_adversaries, seed),
                "T3", seed,
            )
            self.write_report(result, out, f"bound_t3{suffix}", report)
            lipschitz = empirical_if_lipschitz(model, dm.source, cfg.kernel.metric, cfg.bounds.lipschitz_pairs, seed)
            metrics.update_metrics(replace(lipschitz, name=f"{lipschitz.name}{suffix}"))
            result.fits[f"fit{suffix}"] = fit
            result.rows.append({
                "seed": seed, "lambda": lam,
                "train_loss": fit.train_loss, "regularizer_value": fit.regularizer_value, "objective": fit.objective,
                "converged": fit.converged, "target_mse": target_mse(model, dm.target),
                "if_lipschitz": lipschitz.value, **report.summary_row(),
            })
        write_json(out / "metrics.json", metrics.to_dict())
        result.metrics = dict(metrics.reports)
        return result
