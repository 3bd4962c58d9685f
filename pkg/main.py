"""
Command line entry point.
- run <config.json>       fit, check bounds, write reports for every seed
- verify-all [--seeds N]  invariant battery over seeds 0..N-1
- gen-data <config.json>  write only the generated datasets
- report <dir>            aggregate bound_*.json files below a directory

Exit codes: 0 success, 1 failed checks, 2 invalid config/input, 3 numeric failure.
"""
import sys
from pathlib import Path

import pandas as pd
import simple_parsing
import wandb

from agents import *
from config.hparams import ExperimentConfig, VerifyOptions
from theory.reports import BoundReport
from utils.agent_utils import get_agent, get_datamodule
from utils.exceptions import NumericError, UnsupportedOperationError, ValidationError
from utils.io import read_json, resolve_output_dir

EXIT_OK, EXIT_FAILED, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3


def build_parser() -> simple_parsing.ArgumentParser:
    parser = simple_parsing.ArgumentParser(description="Individual fairness under distribution shift: fits and bound checks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="Run the experiment described by a JSON config")
    p_run.add_argument("config", type=str, help="Path to the JSON config")

    p_verify = sub.add_parser("verify-all", help="Run the full invariant battery and print a pass/fail table")
    p_verify.add_arguments(VerifyOptions, dest="options")

    p_gen = sub.add_parser("gen-data", help="Generate and write the datasets of a config, without fitting")
    p_gen.add_argument("config", type=str, help="Path to the JSON config")

    p_report = sub.add_parser("report", help="Aggregate every bound_*.json below a directory")
    p_report.add_argument("directory", type=str, help="Directory to scan")
    return parser


def init_wandb(config: ExperimentConfig):
    hp = config.hparams
    return wandb.init(mode=hp.wandb_mode, project=hp.wandb_project, entity=hp.wandb_entity,
                      config=config.to_dict(), dir=str(resolve_output_dir(hp.output_dir)))


def run(args) -> int:
    config = ExperimentConfig.load_json(args.config)
    print(f"Experiment: {config.hparams.experiment}, seeds: {config.hparams.seeds}")
    wandb_run = init_wandb(config)
    try:
        # Create the Agent and pass all the configuration to it then run it..
        agent = get_agent(config.hparams.experiment)(config)
        outcome = agent.run()
    finally:
        wandb_run.finish()

    for result in outcome.numeric_errors:
        print(f"seed {result.seed}: numeric error in {result.error_module}: {result.numeric_error}", file=sys.stderr)
    for failed in outcome.failed_checks:
        print(f"failed: {failed}", file=sys.stderr)
    print(f"summary: {outcome.summary_path}")
    return outcome.exit_code


def verify_all(args) -> int:
    table = VerifyAll(args.options).run()
    frame = pd.DataFrame(table)[["check", "passed_seeds", "seeds", "required", "passed"]]
    print(frame.to_string(index=False))
    failed = [row["check"] for row in table if not row["passed"]]
    if failed:
        print(f"failed checks: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def gen_data(args) -> int:
    config = ExperimentConfig.load_json(args.config)
    agent = get_agent(config.hparams.experiment)(config)
    for seed in config.hparams.seeds:
        out = agent.seed_dir(seed)
        out.mkdir(parents=True, exist_ok=True)
        dm = get_datamodule(agent.datamodule, config, seed).setup()
        dm.prepare_data(out)
        if hasattr(dm, "graph"):
            dm.graph().save_csv(out / "graph_laplacian.csv")
        print(f"seed {seed}: data written to {out}")
    return EXIT_OK


def report(args) -> int:
    root = Path(args.directory)
    if not root.is_dir():
        raise ValidationError(f"{root} is not a directory")
    rows = []
    for path in sorted(root.rglob("bound_*.json")):
        r = BoundReport.from_dict(read_json(path))
        rows.append({"theorem": r.theorem, "path": str(path), "holds": r.holds, "slack": r.slack,
                     "degenerate": r.degenerate})
    if not rows:
        print(f"no bound reports below {root}")
        return EXIT_OK
    frame = pd.DataFrame(rows)
    live = frame[~frame["degenerate"]]
    table = frame.groupby("theorem").agg(count=("path", "size"), degenerate=("degenerate", "sum"))
    table["fraction_holding"] = live.groupby("theorem")["holds"].apply(lambda h: float((h == True).mean()))
    table["min_slack"] = live.groupby("theorem")["slack"].min()
    print(table.to_string())
    return EXIT_OK if bool((live["holds"] == True).all()) else EXIT_FAILED


COMMANDS = {"run": run, "verify-all": verify_all, "gen-data": gen_data, "report": report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValidationError, UnsupportedOperationError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except NumericError as err:
        print(f"numeric error in {err.module}: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
