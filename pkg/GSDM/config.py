"""
GSDM.config - Flat key=value run configuration

Config files hold one ``key = value`` per line with dotted section keys
(``schedule.family = cosine``); ``#`` starts a comment. Values are parsed as
int, then float, then bool (true/false), then ``none``, then string.
Command-line ``key=value`` overrides win over file values, and the dedicated
``--seed``/``--out``/``--threads`` flags win over both.

The resolved flat dictionary is mapped onto the typed configuration objects
(``NoiseSchedule``, ``DatasetSpec``, ``ScoreNetArch``, ``TrainConfig``,
``SampleConfig``) by the ``*_from`` helpers.
"""

import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional

from GSDM import __version__
from GSDM.datasets import DatasetSpec
from GSDM.exceptions import FormatError, PreconditionError
from GSDM.sampling import SampleConfig
from GSDM.schedules import NoiseSchedule
from GSDM.scorenet import ScoreNetArch
from GSDM.training import TrainConfig

THREADS_ENV = "GSDM_THREADS"

DEFAULTS: Dict[str, Any] = {
    "run.seed": 0,
    "run.out": "out",
    "run.threads": None,
    "dataset.name": "community_small",
    "dataset.count": 100,
    "dataset.split": 0.8,
    "dataset.train": None,
    "dataset.test": None,
    "schedule.kind": "vp",
    "schedule.family": "linear",
    "schedule.beta_min": 0.1,
    "schedule.beta_max": 20.0,
    "schedule.sigma_min": 0.1,
    "schedule.sigma_max": 10.0,
    "schedule.scale": 1.0,
    "spectrum.ordering": "magnitude",
    "spectrum.solver": "auto",
    "model.hidden": 32,
    "model.time_dim": 16,
    "model.use_eigvec": True,
    "model.variant": "spectral",
    "train.epochs": 100,
    "train.batch_size": 8,
    "train.lr": 1e-3,
    "train.optimizer": "adam",
    "train.t_eps": 1e-5,
    "train.checkpoint_every": 0,
    "train.max_steps": None,
    "sample.M": 1000,
    "sample.snr": 0.16,
    "sample.eps_s": 1.0,
    "sample.step_size": None,
    "sample.alpha": 1.0,
    "sample.solver": "pc",
    "sample.count": None,
    "sample.threshold": 0.5,
    "sample.checkpoint": None,
    "eval.statistics": "degree,clustering,orbit",
    "eval.bw_degree": 1.0,
    "eval.bw_clustering": 0.1,
    "eval.bw_orbit": 30.0,
    "eval.bw_adjacency": 1.0,
    "eval.generated": None,
    "eval.test": None,
    "ablate.axis": "steps",
    "ablate.trials": 5,
    "ablate.count": None,
}

_SCHEDULE_FIELDS = ("kind", "family", "beta_min", "beta_max", "b_total", "sigma_min", "sigma_max", "scale")
_DATASET_RESERVED = ("name", "count", "split", "train", "test", "n_min", "n_max")


def parse_value(text: str) -> Any:
    """int -> float -> bool -> None -> str."""
    text = text.strip()
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if lowered in ("none", "null"):
        return None
    return text


def parse_config_text(text: str) -> Dict[str, Any]:
    """
    Parse config-file text.

    Raises:
        FormatError: On a non-comment line without ``=`` or with an empty key.
    """
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise FormatError(f"Expected 'key = value', got {raw.strip()!r}", line=number)
        values[key.strip()] = parse_value(value)
    return values


def load_config(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    with open(path, encoding="utf-8") as handle:
        return parse_config_text(handle.read())


def parse_overrides(items: Iterable[str]) -> Dict[str, Any]:
    """
    Parse command-line ``key=value`` overrides.

    Raises:
        PreconditionError: On an item without ``=``.
    """
    values = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise PreconditionError(f"Override must look like key=value, got {item!r}")
        values[key.strip()] = parse_value(value)
    return values


@dataclass
class RunConfig:
    """
    One CLI invocation with its fully resolved settings.

    Attributes:
        command (str): Sub-command name.
        config_path (str or None): Config file, when given.
        seed (int): Resolved run seed.
        out (str): Output directory.
        threads (int): Worker-thread cap.
        overrides (dict): Command-line overrides as given.
        values (dict): Resolved flat configuration.
    """

    command: str
    config_path: Optional[str] = None
    seed: int = 0
    out: str = "out"
    threads: int = 1
    overrides: Dict[str, Any] = field(default_factory=dict)
    values: Dict[str, Any] = field(default_factory=dict)

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)

    def path(self, *parts: str) -> str:
        return os.path.join(self.out, *parts)


def resolve(
    command: str,
    config_path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
    seed: Optional[int] = None,
    out: Optional[str] = None,
    threads: Optional[int] = None,
) -> RunConfig:
    """
    Merge defaults, config file, overrides and dedicated flags (in increasing priority).

    Raises:
        PreconditionError: If the seed is not a 64-bit unsigned integer or threads < 1.
    """
    values = dict(DEFAULTS)
    values.update(load_config(config_path))
    values.update(overrides or {})
    if seed is not None:
        values["run.seed"] = seed
    if out is not None:
        values["run.out"] = out
    if threads is not None:
        values["run.threads"] = threads
    if values["run.threads"] is None:
        values["run.threads"] = int(os.environ.get(THREADS_ENV, "1"))

    run_seed = values["run.seed"]
    if not isinstance(run_seed, int) or isinstance(run_seed, bool) or not 0 <= run_seed < 2 ** 64:
        raise PreconditionError(f"Seed must be a 64-bit unsigned integer, got {run_seed!r}")
    if int(values["run.threads"]) < 1:
        raise PreconditionError("threads must be >= 1")
    return RunConfig(
        command=command,
        config_path=config_path,
        seed=run_seed,
        out=str(values["run.out"]),
        threads=int(values["run.threads"]),
        overrides=dict(overrides or {}),
        values=values,
    )


def _section(values: Dict[str, Any], prefix: str) -> Dict[str, Any]:
    return {k[len(prefix) + 1:]: v for k, v in values.items() if k.startswith(prefix + ".")}


def schedule_from(run: RunConfig, component: str = "x") -> NoiseSchedule:
    """Shared ``schedule.*`` settings overlaid with ``schedule_x.*`` or ``schedule_lambda.*``."""
    settings = _section(run.values, "schedule")
    settings.update(_section(run.values, f"schedule_{component}"))
    unknown = set(settings) - set(_SCHEDULE_FIELDS)
    if unknown:
        raise PreconditionError(f"Unknown schedule keys: {sorted(unknown)}")
    return NoiseSchedule(**settings)


def dataset_spec_from(run: RunConfig) -> DatasetSpec:
    section = _section(run.values, "dataset")
    params = {k: v for k, v in section.items() if k not in _DATASET_RESERVED}
    return DatasetSpec(
        name=section["name"],
        count=int(section["count"]),
        n_min=section.get("n_min"),
        n_max=section.get("n_max"),
        params=params,
        split=float(section["split"]),
        seed=run.seed,
    )


def arch_from(run: RunConfig, d: int, variant: Optional[str] = None) -> ScoreNetArch:
    return ScoreNetArch(
        d=d,
        hidden=int(run.get("model.hidden")),
        time_dim=int(run.get("model.time_dim")),
        use_eigvec=bool(run.get("model.use_eigvec")),
        variant=variant or run.get("model.variant"),
    )


def train_config_from(run: RunConfig, checkpoint_dir: Optional[str] = None) -> TrainConfig:
    max_steps = run.get("train.max_steps")
    return TrainConfig(
        epochs=int(run.get("train.epochs")),
        batch_size=int(run.get("train.batch_size")),
        lr=float(run.get("train.lr")),
        optimizer=run.get("train.optimizer"),
        seed=run.seed,
        t_eps=float(run.get("train.t_eps")),
        schedule_x=schedule_from(run, "x"),
        schedule_lambda=schedule_from(run, "lambda"),
        checkpoint_every=int(run.get("train.checkpoint_every")),
        checkpoint_dir=checkpoint_dir,
        max_steps=None if max_steps is None else int(max_steps),
    )


def sample_config_from(run: RunConfig, variant: str = "spectral") -> SampleConfig:
    solver = run.get("sample.solver")
    if solver not in ("pc", "splitting"):
        raise PreconditionError(f"Unknown solver: {solver}")
    step_size = run.get("sample.step_size")
    return SampleConfig(
        M=int(run.get("sample.M")),
        snr=float(run.get("sample.snr")),
        eps_s=float(run.get("sample.eps_s")),
        step_size=None if step_size is None else float(step_size),
        alpha=float(run.get("sample.alpha")),
        mode="fullrank-pc" if variant == "fullrank" else solver,
        schedule_x=schedule_from(run, "x"),
        schedule_lambda=schedule_from(run, "lambda"),
        seed=run.seed,
        threshold=float(run.get("sample.threshold")),
        max_workers=run.threads,
    )


def statistics_from(run: RunConfig):
    return [s.strip() for s in str(run.get("eval.statistics")).split(",") if s.strip()]


def bandwidths_from(run: RunConfig) -> Dict[str, float]:
    return {name: float(run.get(f"eval.bw_{name}")) for name in ("degree", "clustering", "orbit", "adjacency")}


def write_manifest(run: RunConfig, outputs: Optional[Dict[str, Any]] = None) -> str:
    """Write ``<out>/manifest.json`` with the command, seed, version and resolved config."""
    os.makedirs(run.out, exist_ok=True)
    path = run.path("manifest.json")
    manifest = {
        "command": run.command,
        "seed": run.seed,
        "version": __version__,
        "config_file": run.config_path,
        "overrides": run.overrides,
        "config": run.values,
        "outputs": outputs or {},
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True, default=str)
    return path
