from agents.TransductiveAgent import TransductiveAgent
from theory.bounds import theorem2_report


class InductiveAgent(TransductiveAgent):
    """Same fit, bound evaluated on fresh draws from both laws."""

    experiment = "inductive_t2"

    def bound(self, model, dm, graph, lam, seed):
        cfg = self.config
        return self.guarded(
            lambda: theorem2_report(model, dm.spec, cfg.kernel, lam, cfg.bounds.mc_n, seed), "T2", seed
        )
