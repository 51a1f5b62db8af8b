"""
GSDM.training - Score-matching training loop

Trains the spectrum and feature score networks on a set of pre-decomposed
graphs. Every source of randomness is derived from the configured seed:

- the shuffle of epoch ``e`` comes from ``default_rng([seed, e])``;
- the times and noise of global step ``s`` come from ``default_rng([seed, 1, s])``.

A run split into resumed segments therefore reproduces the unsplit run exactly.

Example usage:
```python
from GSDM.datasets import DatasetSpec, gen_community_small
from GSDM.graphs import decompose_all
from GSDM.scorenet import ScoreNetArch
from GSDM.training import TrainConfig, train

graphs = gen_community_small(DatasetSpec(count=20, seed=0))
records = decompose_all(graphs)
config = TrainConfig(epochs=5, batch_size=4, checkpoint_dir="runs/demo")
params, history = train(records, ScoreNetArch(d=graphs[0].d), config)
print(history.tail())
```
"""

import math
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch

from GSDM.console import get_logger, make_progress
from GSDM.exceptions import NonFiniteError, PreconditionError
from GSDM.graphs import SpectralGraph
from GSDM.schedules import NoiseSchedule
from GSDM.scorenet import (
    NoisyExample,
    ScoreNetArch,
    ScoreNetParams,
    batch_loss,
    load_checkpoint,
    restore_adam_state,
    save_checkpoint,
)

logger = get_logger("training")

OPTIMIZERS = ("adam", "sgd")
HISTORY_COLUMNS = ["epoch", "step", "loss", "loss_X", "loss_Lambda"]


@dataclass
class TrainConfig:
    """
    Training hyper-parameters.

    Attributes:
        epochs (int): Number of passes K over the dataset.
        batch_size (int): Graphs per optimizer step b.
        lr (float): Learning rate.
        optimizer (str): "adam" (betas 0.9/0.999, eps 1e-8) or "sgd".
        seed (int): Seed for initialization, shuffling and noise.
        t_eps (float): Lower bound of the sampled diffusion time.
        schedule_x (NoiseSchedule): Schedule for node features.
        schedule_lambda (NoiseSchedule or None): Schedule for the spectrum
            (defaults to ``schedule_x``).
        checkpoint_every (int): Write a checkpoint every this many steps (0 disables).
        checkpoint_dir (str or None): Directory for checkpoints.
        max_steps (int or None): Stop once the global step reaches this value.
    """

    epochs: int = 100
    batch_size: int = 8
    lr: float = 1e-3
    optimizer: str = "adam"
    seed: int = 0
    t_eps: float = 1e-5
    schedule_x: NoiseSchedule = field(default_factory=NoiseSchedule)
    schedule_lambda: Optional[NoiseSchedule] = None
    checkpoint_every: int = 0
    checkpoint_dir: Optional[str] = None
    max_steps: Optional[int] = None

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise PreconditionError("TrainConfig needs epochs >= 0 and batch_size >= 1")
        if self.lr <= 0:
            raise PreconditionError(f"Learning rate must be positive, got {self.lr}")
        if self.optimizer not in OPTIMIZERS:
            raise PreconditionError(f"Unknown optimizer: {self.optimizer}")
        if not 0.0 < self.t_eps < self.schedule_x.T:
            raise PreconditionError(f"t_eps must lie in (0, T), got {self.t_eps}")

    @property
    def lambda_schedule(self) -> NoiseSchedule:
        return self.schedule_lambda or self.schedule_x


def build_optimizer(params: ScoreNetParams, config: TrainConfig) -> torch.optim.Optimizer:
    """Adam(0.9, 0.999, 1e-8) or plain SGD over all network parameters."""
    if config.optimizer == "adam":
        return torch.optim.Adam(params.parameters(), lr=config.lr, betas=(0.9, 0.999), eps=1e-8)
    return torch.optim.SGD(params.parameters(), lr=config.lr)


def steps_per_epoch(dataset_size: int, batch_size: int) -> int:
    return math.ceil(dataset_size / batch_size)


def _checkpoint_path(directory: str, step: int) -> str:
    return os.path.join(directory, f"checkpoint_{step:06d}.ckpt")


def _run(
    records: Sequence[SpectralGraph],
    params: ScoreNetParams,
    optimizer: torch.optim.Optimizer,
    config: TrainConfig,
    start_step: int,
    last_checkpoint: Optional[str] = None,
) -> Tuple[ScoreNetParams, pd.DataFrame]:
    size = len(records)
    per_epoch = steps_per_epoch(size, config.batch_size)
    total = per_epoch * config.epochs
    if config.max_steps is not None:
        total = min(total, config.max_steps)
    variant = params.arch.variant
    rows: List[dict] = []
    step = start_step

    if config.checkpoint_dir:
        os.makedirs(config.checkpoint_dir, exist_ok=True)

    with make_progress() as progress:
        task = progress.add_task("[cyan]Training score networks...", total=max(total - start_step, 0))
        while step < total:
            epoch, position = divmod(step, per_epoch)
            order = np.random.default_rng([config.seed, epoch]).permutation(size)
            indices = order[position * config.batch_size:(position + 1) * config.batch_size]

            noise_rng = np.random.default_rng([config.seed, 1, step])
            batch = [
                NoisyExample.draw(records[i], noise_rng, t_eps=config.t_eps, T=config.schedule_x.T, variant=variant)
                for i in indices
            ]

            optimizer.zero_grad(set_to_none=True)
            parts = batch_loss(params, batch, config.schedule_x, config.lambda_schedule)
            if not torch.isfinite(parts.total):
                logger.error(f"[red]✖ Non-finite loss at step {step}[/red]")
                raise NonFiniteError("Non-finite training loss", step=step, last_checkpoint=last_checkpoint)
            parts.total.backward()
            optimizer.step()
            step += 1

            rows.append({
                "epoch": epoch,
                "step": step,
                "loss": float(parts.total.detach()),
                "loss_X": float(parts.loss_X.detach()),
                "loss_Lambda": float(parts.loss_Lambda.detach()),
            })
            if config.checkpoint_dir and config.checkpoint_every and step % config.checkpoint_every == 0:
                last_checkpoint = _checkpoint_path(config.checkpoint_dir, step)
                save_checkpoint(last_checkpoint, params, optimizer, step=step)
            progress.advance(task)

    if config.checkpoint_dir and step > start_step:
        final_path = _checkpoint_path(config.checkpoint_dir, step)
        if final_path != last_checkpoint:
            save_checkpoint(final_path, params, optimizer, step=step)

    history = pd.DataFrame(rows, columns=HISTORY_COLUMNS)
    if len(history):
        logger.info(
            f"[green]✔ Trained {len(history)} steps[/green] "
            f"(final loss {history['loss'].iloc[-1]:.4f}, global step {step})"
        )
    return params, history


def train(
    dataset: Sequence[SpectralGraph],
    arch: ScoreNetArch,
    config: TrainConfig,
    params: Optional[ScoreNetParams] = None,
) -> Tuple[ScoreNetParams, pd.DataFrame]:
    """
    Train score networks from scratch (or from ``params``) on pre-decomposed graphs.

    Args:
        dataset (list of SpectralGraph): Training graphs with their spectra.
        arch (ScoreNetArch): Network dimensions; ``arch.d`` must match the features.
        config (TrainConfig): Training hyper-parameters.
        params (ScoreNetParams, optional): Starting networks; initialized from
            ``config.seed`` when omitted.

    Returns:
        tuple: ``(params, history)`` where ``history`` is a DataFrame with one row
        per optimizer step (epoch, step, loss, loss_X, loss_Lambda).

    Raises:
        PreconditionError: If the dataset is empty or the feature dimension differs.
        NonFiniteError: If the loss becomes NaN or infinite.
    """
    _check_dataset(dataset, arch)
    if params is None:
        params = ScoreNetParams.initialize(arch, seed=config.seed)
    optimizer = build_optimizer(params, config)
    logger.info(
        f"Training {arch.variant} score networks ({params.parameter_count()} parameters) "
        f"on [bold]{len(dataset)}[/bold] graphs"
    )
    return _run(dataset, params, optimizer, config, start_step=0)


def resume(
    checkpoint_path: str,
    dataset: Sequence[SpectralGraph],
    config: TrainConfig,
    arch: Optional[ScoreNetArch] = None,
) -> Tuple[ScoreNetParams, pd.DataFrame]:
    """
    Continue training from a checkpoint with restored parameters and optimizer moments.

    The checkpoint's global step selects the epoch, batch position and noise
    stream to continue with; ``config.max_steps`` (or ``config.epochs``) is the
    total step budget of the combined run.

    Raises:
        FormatError: If the checkpoint is unreadable.
        ArchitectureMismatchError: If ``arch`` differs from the checkpoint's.
    """
    checkpoint = load_checkpoint(checkpoint_path, arch=arch)
    params = checkpoint.params
    _check_dataset(dataset, params.arch)
    optimizer = build_optimizer(params, config)
    if checkpoint.moments is not None and isinstance(optimizer, torch.optim.Adam):
        restore_adam_state(optimizer, params, checkpoint.moments, checkpoint.step)
    logger.info(f"Resuming from [bold]{checkpoint_path}[/bold] at step {checkpoint.step}")
    return _run(dataset, params, optimizer, config, start_step=checkpoint.step, last_checkpoint=checkpoint_path)


def held_out_loss(
    params: ScoreNetParams,
    dataset: Sequence[SpectralGraph],
    config: TrainConfig,
    draws: int = 256,
) -> float:
    """
    Mean score-matching loss over a fixed set of noise draws.

    The draws come from ``default_rng([config.seed, 2])`` (a stream the training
    loop never touches) and cycle through ``dataset``, so two parameter sets
    evaluated with the same config see identical times and noise.

    Raises:
        PreconditionError: If the dataset is empty, features mismatch or ``draws < 1``.
    """
    _check_dataset(dataset, params.arch)
    if draws < 1:
        raise PreconditionError(f"draws must be >= 1, got {draws}")
    rng = np.random.default_rng([config.seed, 2])
    batch = [
        NoisyExample.draw(dataset[i % len(dataset)], rng, t_eps=config.t_eps, T=config.schedule_x.T,
                          variant=params.arch.variant)
        for i in range(draws)
    ]
    with torch.no_grad():
        return float(batch_loss(params, batch, config.schedule_x, config.lambda_schedule).total)


def epoch_means(history: pd.DataFrame) -> pd.DataFrame:
    """Per-epoch mean of the loss columns."""
    return history.groupby("epoch", as_index=False)[["loss", "loss_X", "loss_Lambda"]].mean()


def _check_dataset(dataset: Sequence[SpectralGraph], arch: ScoreNetArch) -> None:
    if not dataset:
        raise PreconditionError("Cannot train on an empty dataset")
    for record in dataset:
        if record.graph.d != arch.d:
            raise PreconditionError(f"Graph feature dimension {record.graph.d} does not match arch.d={arch.d}")
