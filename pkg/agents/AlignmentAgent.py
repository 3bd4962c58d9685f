from dataclasses import replace

import pandas as pd

from agents.BaseAgent import BaseAgent, SeedResult
from datamodules.FactorModelDataModule import FactorModelDataModule
from models.__base import ModelSpec
from models.alignment import RepresentationModel, fit_alignment, prediction_consistency, verify_theorem4
from models.kernels import MetricSpec
from models.optimizers.solver import fit_erm
from utils.io import write_json
from utils.metrics import MetricsModule, empirical_if_lipschitz
from utils.seeding import child_seeds


class AlignmentAgent(BaseAgent):
    """Fit Phi on factor-model data and check that it annihilates the protected direction."""

    experiment = "alignment_t4"
    datamodule = "FactorModelDataModule"

    def run_seed(self, seed, out):
        cfg = self.config
        bp = cfg.bounds
        result = SeedResult(seed)
        dm = FactorModelDataModule(cfg, seed).setup()
        dm.prepare_data(out)
        data, b = dm.train, dm.spec.b

        phi, trace = fit_alignment(
            data, bp.alignment_q, cfg.sinkhorn, bp.alignment_steps, bp.alignment_step_size, seed,
            penalty=bp.alignment_penalty, max_points=bp.alignment_max_points,
        )
        write_json(out / "alignment.json", phi.to_json())
        pd.DataFrame(trace.rows(b)).to_csv(out / "trace.csv", index=False, float_format="%.17g", lineterminator="\n")

        # fresh draws for the check
        report = verify_theorem4(phi, dm.spec, cfg.hparams.n_target, child_seeds(seed, 1)[0], cfg.sinkhorn, trace)
        report.seeds = [int(seed)]
        self.write_report(result, out, "bound_t4", report)

        metrics = MetricsModule()
        row = {
            "seed": seed, "relative_leakage": report.lhs,
            "initial_divergence": trace.divergence[0], "final_divergence": trace.divergence[-1],
        }
        if data.is_labeled:
            head_spec = ModelSpec(family="Linear")
            raw_head, _ = fit_erm(data, head_spec)
            aligned_head, _ = fit_erm(data.with_features(phi.transform(data.features)), head_spec)
            raw = prediction_consistency(raw_head, data, b)
            aligned = prediction_consistency(aligned_head, data, b, alignment=phi)
            lipschitz = empirical_if_lipschitz(
                RepresentationModel(aligned_head, phi), data, MetricSpec.projecting_out([b]), bp.lipschitz_pairs, seed,
                flip_direction=b,
            )
            for report_ in (replace(raw, name="prediction_consistency_raw"),
                            replace(aligned, name="prediction_consistency_aligned"), lipschitz):
                metrics.update_metrics(report_)
            row.update({"pc_raw": raw.value, "pc_aligned": aligned.value, "if_lipschitz_aligned": lipschitz.value})
        write_json(out / "metrics.json", metrics.to_dict())
        result.metrics = dict(metrics.reports)
        result.rows.append({**row, **report.summary_row()})
        return result
