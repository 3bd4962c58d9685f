from agents.TransductiveAgent import TransductiveAgent
from theory.bounds import theorem5_report


class GeneralShiftAgent(TransductiveAgent):
    """Regression function differs across domains; target labels follow target_regression_fn."""

    experiment = "general_shift_t5"

    def bound(self, model, dm, graph, lam, seed):
        cfg, spec = self.config, dm.spec
        return self.guarded(
            lambda: theorem5_report(model, spec.regression_fn, spec.target_regression_fn, spec, cfg.kernel, lam,
                                    cfg.bounds.mc_n, seed),
            "T5", seed,
        )
