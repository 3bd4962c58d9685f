from agents.BaseAgent import BaseAgent, SeedResult, target_mse
from datamodules.CovariateShiftDataModule import CovariateShiftDataModule
from models.optimizers.solver import fit_regularized
from theory.bounds import theorem1_report
from utils.agent_utils import save_model


class TransductiveAgent(BaseAgent):
    """Laplacian-regularized fit, checked against the bound on the given target points."""

    experiment = "transductive_t1"

    def fit(self, dm: CovariateShiftDataModule, graph, lam: float):
        return fit_regularized(dm.source, dm.target.without_labels(), self.config.solver.model, graph, lam)

    def bound(self, model, dm: CovariateShiftDataModule, graph, lam: float, seed: int):
        return self.guarded(
            lambda: theorem1_report(model, dm.source, dm.target, graph, dm.spec.regression_fn, lam), "T1", seed
        )

    def run_seed(self, seed, out):
        result = SeedResult(seed)
        dm = CovariateShiftDataModule(self.config, seed).setup()
        dm.prepare_data(out)
        graph = dm.graph()
        for i, lam in enumerate(self.config.solver.lambdas):
            suffix = self.suffix(i)
            model, fit = self.fit(dm, graph, lam)
            save_model(model, out / f"model{suffix}.json")
            report = self.bound(model, dm, graph, lam, seed)
            self.write_report(result, out, f"bound_{report.theorem.lower()}{suffix}", report)
            result.fits[f"fit{suffix}"] = fit
            result.rows.append({
                "seed": seed, "lambda": lam,
                "train_loss": fit.train_loss, "regularizer_value": fit.regularizer_value, "objective": fit.objective,
                "converged": fit.converged, "target_mse": target_mse(model, dm.target),
                **report.summary_row(),
            })
        return result
