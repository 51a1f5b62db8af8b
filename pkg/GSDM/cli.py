"""
GSDM.cli - Command-line entry point

```
gsdm <gen-data|train|sample|eval|ablate|verify> [--config PATH] [--seed N] [--out DIR]
     [--threads K] [key=value ...]
```

Every command writes ``<out>/manifest.json`` (resolved config, seed, version)
and mirrors its log into ``<out>/run.log``. Exit codes: 0 success, 1 usage
error, 2 runtime failure, 3 verification failure.

Example usage:
```
gsdm gen-data --out runs/cs dataset.name=community_small
gsdm train --out runs/cs train.epochs=50
gsdm sample --out runs/cs --steps 200 --alpha 0.9
gsdm eval --out runs/cs
gsdm verify --quick
```
"""

import argparse
import os
import sys
from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd
import torch
from rich.table import Table

from GSDM import __version__, plots
from GSDM.config import (
    RunConfig,
    arch_from,
    bandwidths_from,
    dataset_spec_from,
    parse_overrides,
    resolve,
    sample_config_from,
    statistics_from,
    train_config_from,
    write_manifest,
)
from GSDM.console import add_file_handler, console, get_logger, make_progress, remove_handler
from GSDM.datasets import DatasetSpec, generate_dataset, load_dataset, save_dataset, split
from GSDM.exceptions import GSDMError, PreconditionError, VerificationError
from GSDM.graphs import Graph, SpectralGraph, decompose_all
from GSDM.metrics import evaluate
from GSDM.oracles import run_verification_suite
from GSDM.sampling import SampleConfig, generate_batch
from GSDM.schedules import FAMILIES
from GSDM.scorenet import ScoreNetParams, load_checkpoint, save_checkpoint
from GSDM.training import epoch_means, resume, train

logger = get_logger("cli")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3

ABLATION_AXES = {
    "steps": [50, 100, 200, 500, 1000],
    "schedule": list(FAMILIES),
    "alpha": [round(0.1 * k, 1) for k in range(1, 11)],
    "eigdist": ["even", "moderate", "skewed"],
    "variant": ["spectral", "fullrank"],
    "budget": [0.25, 1.0],
}


class UsageError(GSDMError):
    """Malformed command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --- shared helpers ---

def _dataset_paths(run: RunConfig) -> Tuple[str, str]:
    name = run.get("dataset.name")
    train_path = run.get("dataset.train") or run.path("data", f"{name}.train.jsonl")
    test_path = run.get("dataset.test") or run.path("data", f"{name}.test.jsonl")
    return train_path, test_path


def _load_records(run: RunConfig, path: str) -> List[SpectralGraph]:
    if not os.path.exists(path):
        raise PreconditionError(f"Dataset file not found: {path} (run gen-data first)")
    graphs = load_dataset(path)
    if not graphs:
        raise PreconditionError(f"Dataset file {path} holds no graphs")
    return decompose_all(
        graphs,
        ordering=run.get("spectrum.ordering"),
        solver=run.get("spectrum.solver"),
        max_workers=run.threads,
    )


def _metrics_statistics(graphs: Sequence[Graph], run: RunConfig) -> List[str]:
    if any(g.weighted for g in graphs):
        return ["adjacency"]
    return statistics_from(run)


def _train_inline(run: RunConfig, records: List[SpectralGraph], variant: str,
                  schedule_family: Optional[str] = None, budget: float = 1.0,
                  seed: Optional[int] = None) -> ScoreNetParams:
    config = train_config_from(run)
    if seed is not None:
        config.seed = seed
    if schedule_family is not None:
        config.schedule_x = replace(config.schedule_x, family=schedule_family)
        config.schedule_lambda = replace(config.lambda_schedule, family=schedule_family)
    if budget < 1.0:
        config.epochs = max(1, int(round(config.epochs * budget)))
        if config.max_steps is not None:
            config.max_steps = max(1, int(round(config.max_steps * budget)))
    params, _ = train(records, arch_from(run, records[0].graph.d, variant), config)
    return params


# --- commands ---

def cmd_gen_data(run: RunConfig) -> Dict[str, str]:
    """Generate a dataset, split it and write train/test files."""
    spec = dataset_spec_from(run)
    graphs = generate_dataset(spec, max_workers=run.threads)
    train_graphs, test_graphs = split(graphs, spec.split, spec.seed)
    train_path, test_path = _dataset_paths(run)
    save_dataset(train_graphs, train_path)
    save_dataset(test_graphs, test_path)
    logger.info(
        f"[green]✔ {spec.name}: {len(train_graphs)} train / {len(test_graphs)} test graphs[/green]"
    )
    return {
        "train": train_path,
        "test": test_path,
        "train_count": len(train_graphs),
        "test_count": len(test_graphs),
        "generator": {"name": spec.name, "n_min": spec.n_min, "n_max": spec.n_max, "params": spec.params},
    }


def cmd_train(run: RunConfig, resume_from: Optional[str] = None) -> Dict[str, str]:
    """Train score networks; write the final checkpoint and the loss history."""
    train_path, _ = _dataset_paths(run)
    records = _load_records(run, train_path)
    config = train_config_from(run, checkpoint_dir=run.path("checkpoints"))
    arch = arch_from(run, records[0].graph.d)
    if resume_from:
        params, history = resume(resume_from, records, config, arch=arch)
    else:
        params, history = train(records, arch, config)
    model_path = run.path("model.ckpt")
    save_checkpoint(model_path, params, step=int(history["step"].iloc[-1]) if len(history) else 0)
    history_path = run.path("loss_history.csv")
    history.to_csv(history_path, index=False)
    outputs = {"checkpoint": model_path, "loss_history": history_path}
    if len(history):
        means = epoch_means(history)
        outputs["loss_plot"] = plots.line_chart(
            {"loss": (means["epoch"].tolist(), means["loss"].tolist())},
            run.path("loss.svg"), title="Training loss", xlabel="epoch", ylabel="loss",
        )
    return outputs


def _sample_with(run: RunConfig, params: ScoreNetParams, records: List[SpectralGraph], count: int,
                 config: SampleConfig) -> Tuple[List[Graph], pd.DataFrame]:
    if params.arch.d != records[0].graph.d:
        raise PreconditionError(
            f"Checkpoint feature dimension {params.arch.d} does not match dataset dimension {records[0].graph.d}"
        )
    return generate_batch(params, records, count, config)


def cmd_sample(run: RunConfig) -> Dict[str, str]:
    """Generate graphs from a trained checkpoint."""
    train_path, test_path = _dataset_paths(run)
    records = _load_records(run, train_path)
    checkpoint_path = run.get("sample.checkpoint") or run.path("model.ckpt")
    if not os.path.exists(checkpoint_path):
        raise PreconditionError(f"Checkpoint not found: {checkpoint_path} (run train first)")
    params = load_checkpoint(checkpoint_path).params
    variant = run.get("model.variant")
    if params.arch.variant != variant:
        raise PreconditionError(f"Checkpoint holds a {params.arch.variant} network, requested {variant}")
    count = run.get("sample.count")
    if count is None:
        count = len(load_dataset(test_path)) if os.path.exists(test_path) else len(records)
    graphs, timing = _sample_with(run, params, records, int(count), sample_config_from(run, variant))
    generated_path = run.path("generated.jsonl")
    timing_path = run.path("timing.csv")
    save_dataset(graphs, generated_path)
    timing.to_csv(timing_path, index=False)
    return {"generated": generated_path, "timing": timing_path}


def cmd_eval(run: RunConfig) -> Dict[str, str]:
    """MMD table between generated and test graphs plus a bar chart."""
    _, test_path = _dataset_paths(run)
    generated = load_dataset(run.get("eval.generated") or run.path("generated.jsonl"))
    test = load_dataset(run.get("eval.test") or test_path)
    table = evaluate(
        generated,
        test,
        statistics=_metrics_statistics(test, run),
        bandwidths=bandwidths_from(run),
        dataset=run.get("dataset.name"),
        method=run.get("model.variant"),
        seed=run.seed,
        max_workers=run.threads,
    )
    metrics_path = run.path("metrics.csv")
    table.to_csv(metrics_path, index=False)
    plot_path = plots.bar_chart(
        table["statistic"].tolist(), table["mmd"].tolist(), run.path("metrics.svg"), title="MMD", ylabel="MMD"
    )
    _print_table(table[["statistic", "mmd", "bandwidth"]], "Evaluation")
    return {"metrics": metrics_path, "plot": plot_path}


def _ablation_data(run: RunConfig, dist: Optional[str] = None) -> Tuple[List[SpectralGraph], List[Graph]]:
    train_path, test_path = _dataset_paths(run)
    if dist is None and os.path.exists(train_path) and os.path.exists(test_path):
        return _load_records(run, train_path), load_dataset(test_path)
    spec = dataset_spec_from(run)
    if dist is not None:
        spec = DatasetSpec(name="synthetic_spectrum", count=spec.count, params={"dist": dist},
                           split=spec.split, seed=spec.seed)
    train_graphs, test_graphs = split(generate_dataset(spec, max_workers=run.threads), spec.split, spec.seed)
    records = decompose_all(train_graphs, ordering=run.get("spectrum.ordering"),
                            solver=run.get("spectrum.solver"), max_workers=run.threads)
    return records, test_graphs


def cmd_ablate(run: RunConfig, axis: str) -> Dict[str, str]:
    """Sweep one ablation axis and write a long-format table plus a chart."""
    if axis not in ABLATION_AXES:
        raise PreconditionError(f"Unknown ablation axis: {axis} (choose from {', '.join(ABLATION_AXES)})")
    values = ABLATION_AXES[axis]
    trials = int(run.get("ablate.trials")) if axis == "schedule" else 1
    base_sample = sample_config_from(run)
    rows = []

    records: List[SpectralGraph] = []
    test: List[Graph] = []
    shared_params = None
    if axis != "eigdist":
        records, test = _ablation_data(run)
    if axis in ("steps", "alpha"):
        checkpoint_path = run.get("sample.checkpoint")
        if checkpoint_path:
            shared_params = load_checkpoint(checkpoint_path).params
        else:
            shared_params = _train_inline(run, records, "spectral")

    with make_progress() as progress:
        task = progress.add_task(f"[cyan]Ablating {axis}...", total=len(values) * trials)
        for value in values:
            for trial in range(trials):
                seed = run.seed + trial
                variant = "spectral"
                sample_config = replace(base_sample, seed=seed)
                if axis == "steps":
                    params, sample_config.M = shared_params, int(value)
                elif axis == "alpha":
                    params, sample_config.alpha = shared_params, float(value)
                elif axis == "eigdist":
                    records, test = _ablation_data(run, dist=value)
                    params = _train_inline(run, records, "spectral")
                elif axis == "schedule":
                    params = _train_inline(run, records, "spectral", schedule_family=value, seed=seed)
                    sample_config.schedule_x = replace(sample_config.schedule_x, family=value)
                    sample_config.schedule_lambda = replace(sample_config.lambda_schedule, family=value)
                elif axis == "variant":
                    variant = value
                    params = _train_inline(run, records, variant)
                    if variant == "fullrank":
                        sample_config.mode = "fullrank-pc"
                else:
                    params = _train_inline(run, records, "spectral", budget=value)

                count = run.get("ablate.count") or len(test)
                graphs, timing = generate_batch(params, records, int(count), sample_config)
                table = evaluate(
                    graphs, test,
                    statistics=_metrics_statistics(test, run),
                    bandwidths=bandwidths_from(run),
                    dataset=run.get("dataset.name") if axis != "eigdist" else f"synthetic_{value}",
                    method=variant,
                    seed=seed,
                    max_workers=run.threads,
                )
                table.insert(0, "axis", axis)
                table.insert(1, "value", value)
                table.insert(2, "trial", trial)
                table["ms_per_graph"] = float(timing["ms"].mean())
                rows.append(table)
                progress.advance(task)

    result = pd.concat(rows, ignore_index=True)
    table_path = run.path(f"ablation_{axis}.csv")
    result.to_csv(table_path, index=False)
    avg = result[result["statistic"] == "avg"]
    plot_path = run.path(f"ablation_{axis}.svg")
    if axis == "schedule":
        plots.box_chart({str(v): avg[avg["value"] == v]["mmd"].tolist() for v in values}, plot_path,
                        title="Schedule ablation", ylabel="Avg MMD")
    elif axis in ("steps", "alpha", "budget"):
        plots.line_chart({"avg": (avg["value"].astype(float).tolist(), avg["mmd"].tolist())}, plot_path,
                         title=f"{axis} ablation", xlabel=axis, ylabel="Avg MMD")
    else:
        plots.bar_chart([str(v) for v in avg["value"]], avg["mmd"].tolist(), plot_path,
                        title=f"{axis} ablation", ylabel="MMD")
    return {"table": table_path, "plot": plot_path}


def cmd_verify(run: RunConfig, quick: bool = False) -> Dict[str, str]:
    """Run the oracle suite; raise VerificationError when any check fails."""
    report = run_verification_suite(seed=run.seed, quick=quick)
    os.makedirs(run.out, exist_ok=True)
    report_path = run.path("verify.csv")
    report.to_csv(report_path, index=False)
    _print_table(report, "Verification")
    failed = report[~report["passed"]]
    if len(failed):
        raise VerificationError(f"{len(failed)} check(s) failed: {', '.join(failed['check'])}")
    return {"report": report_path}


def _print_table(frame: pd.DataFrame, title: str) -> None:
    table = Table(title=title)
    for column in frame.columns:
        table.add_column(str(column))
    for row in frame.itertuples(index=False):
        table.add_row(*[f"{v:.6g}" if isinstance(v, float) else str(v) for v in row])
    console.print(table)


# --- argument parsing ---

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gsdm", description="Spectral diffusion models for graph generation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("--config", help="flat key=value config file")
        sub.add_argument("--seed", type=int, help="run seed (overrides run.seed)")
        sub.add_argument("--out", help="output directory (overrides run.out)")
        sub.add_argument("--threads", type=int, help="worker-thread cap (fallback: $GSDM_THREADS)")
        sub.add_argument("overrides", nargs="*", metavar="key=value")
        return sub

    gen = add("gen-data", "generate a synthetic dataset and its train/test split")
    gen.add_argument("--dataset", help="dataset name (overrides dataset.name)")
    tr = add("train", "train score networks")
    tr.add_argument("--variant", choices=["spectral", "fullrank"])
    tr.add_argument("--resume", help="checkpoint to resume from")
    sa = add("sample", "generate graphs from a checkpoint")
    sa.add_argument("--steps", type=int, help="sampling steps M")
    sa.add_argument("--alpha", type=float, help="fraction of eigenvalues diffused")
    sa.add_argument("--solver", choices=["pc", "splitting"])
    sa.add_argument("--variant", choices=["spectral", "fullrank"])
    sa.add_argument("--checkpoint", help="checkpoint path")
    add("eval", "compute MMD metrics")
    ab = add("ablate", "sweep one ablation axis")
    ab.add_argument("--axis", choices=list(ABLATION_AXES))
    ab.add_argument("--train-inline", action="store_true", help="train a model for the sweep even if a checkpoint is configured")
    ve = add("verify", "run the oracle verification suite")
    ve.add_argument("--quick", action="store_true", help="reduced sample counts")
    return parser


def _flag_overrides(args: argparse.Namespace) -> Dict[str, object]:
    mapping = {
        "dataset": "dataset.name",
        "variant": "model.variant",
        "steps": "sample.M",
        "alpha": "sample.alpha",
        "solver": "sample.solver",
        "checkpoint": "sample.checkpoint",
        "axis": "ablate.axis",
    }
    return {key: getattr(args, name) for name, key in mapping.items() if getattr(args, name, None) is not None}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv`` and run one command; returns the process exit code."""
    handler = None
    try:
        args = build_parser().parse_args(argv)
        overrides = parse_overrides(args.overrides)
        overrides.update(_flag_overrides(args))
        if getattr(args, "train_inline", False):
            overrides["sample.checkpoint"] = None
        run = resolve(args.command, args.config, overrides, seed=args.seed, out=args.out, threads=args.threads)
        os.makedirs(run.out, exist_ok=True)
        handler = add_file_handler(run.path("run.log"))
        torch.set_num_threads(run.threads)
        logger.info(f"[bold]gsdm {run.command}[/bold] (seed {run.seed}, out {run.out})")

        if run.command == "gen-data":
            outputs = cmd_gen_data(run)
        elif run.command == "train":
            outputs = cmd_train(run, resume_from=args.resume)
        elif run.command == "sample":
            outputs = cmd_sample(run)
        elif run.command == "eval":
            outputs = cmd_eval(run)
        elif run.command == "ablate":
            outputs = cmd_ablate(run, run.get("ablate.axis"))
        else:
            try:
                outputs = cmd_verify(run, quick=args.quick)
            finally:
                write_manifest(run)
        write_manifest(run, outputs)
        return EXIT_OK
    except (UsageError, PreconditionError) as e:
        logger.error(f"[red]✖ Usage error: {e}[/red]")
        return EXIT_USAGE
    except VerificationError as e:
        logger.error(f"[red]✖ Verification failed: {e}[/red]")
        return EXIT_VERIFY
    except (GSDMError, OSError) as e:
        logger.error(f"[red]✖ {type(e).__name__}: {e}[/red]")
        return EXIT_RUNTIME
    finally:
        if handler is not None:
            remove_handler(handler)


if __name__ == "__main__":
    sys.exit(main())
