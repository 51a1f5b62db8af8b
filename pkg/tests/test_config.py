import json

import pytest

from GSDM import __version__
from GSDM.config import (
    DEFAULTS,
    THREADS_ENV,
    arch_from,
    bandwidths_from,
    dataset_spec_from,
    parse_config_text,
    parse_overrides,
    parse_value,
    resolve,
    sample_config_from,
    schedule_from,
    statistics_from,
    train_config_from,
    write_manifest,
)
from GSDM.exceptions import FormatError, PreconditionError


@pytest.mark.parametrize(
    "text, expected",
    [("3", 3), ("2.5", 2.5), ("1e-3", 1e-3), ("true", True), ("False", False), ("none", None), ("cosine", "cosine")],
)
def test_parse_value(text, expected):
    assert parse_value(text) == expected
    assert type(parse_value(text)) is type(expected)


def test_config_text_with_comments():
    values = parse_config_text("# run\nschedule.family = cosine  # smooth\n\ntrain.epochs=5\n")
    assert values == {"schedule.family": "cosine", "train.epochs": 5}


def test_config_text_errors_carry_line_numbers():
    with pytest.raises(FormatError) as info:
        parse_config_text("train.epochs = 5\nnot a pair\n")
    assert info.value.line == 2


def test_overrides_need_equals():
    assert parse_overrides(["a.b=1", "c=x"]) == {"a.b": 1, "c": "x"}
    with pytest.raises(PreconditionError):
        parse_overrides(["seed"])


class TestResolve:
    def test_precedence(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("train.epochs = 7\nrun.seed = 3\nsample.M = 20\n", encoding="utf-8")
        run = resolve("train", str(path), {"train.epochs": 9, "run.seed": 4}, seed=5)
        assert run.get("train.epochs") == 9
        assert run.get("sample.M") == 20
        assert run.seed == 5
        assert run.get("model.hidden") == DEFAULTS["model.hidden"]

    def test_threads_from_environment(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "3")
        assert resolve("eval").threads == 3
        assert resolve("eval", threads=2).threads == 2

    @pytest.mark.parametrize("seed", [-1, 2 ** 64, "abc"])
    def test_invalid_seed(self, seed):
        with pytest.raises(PreconditionError):
            resolve("train", overrides={"run.seed": seed})

    def test_invalid_threads(self):
        with pytest.raises(PreconditionError):
            resolve("train", threads=0)

    def test_out_directory(self, tmp_path):
        run = resolve("eval", out=str(tmp_path))
        assert run.path("metrics.csv") == str(tmp_path / "metrics.csv")


class TestTypedSections:
    def test_component_schedules(self):
        run = resolve("train", overrides={"schedule.family": "cosine", "schedule_lambda.kind": "ve"})
        assert schedule_from(run, "x").family == "cosine" and schedule_from(run, "x").kind == "vp"
        lam = schedule_from(run, "lambda")
        assert lam.family == "cosine" and lam.kind == "ve"

    def test_unknown_schedule_key(self):
        run = resolve("train", overrides={"schedule.beta_peak": 3.0})
        with pytest.raises(PreconditionError):
            schedule_from(run)

    def test_dataset_generator_params(self):
        run = resolve("gen-data", overrides={"dataset.name": "erdos_renyi", "dataset.p": 0.3, "dataset.n_min": 6,
                                             "dataset.n_max": 8}, seed=9)
        spec = dataset_spec_from(run)
        assert spec.params["p"] == 0.3 and (spec.n_min, spec.n_max) == (6, 8) and spec.seed == 9

    def test_train_and_sample_configs(self):
        run = resolve("train", overrides={"train.epochs": 3, "train.max_steps": 10, "sample.M": 40,
                                          "sample.alpha": 0.5}, seed=2, threads=2)
        config = train_config_from(run, checkpoint_dir="ckpt")
        assert (config.epochs, config.max_steps, config.seed, config.checkpoint_dir) == (3, 10, 2, "ckpt")
        sample = sample_config_from(run)
        assert (sample.M, sample.alpha, sample.mode, sample.max_workers) == (40, 0.5, "pc", 2)
        assert sample_config_from(run, "fullrank").mode == "fullrank-pc"
        assert arch_from(run, 4, "fullrank").variant == "fullrank"

    def test_unknown_solver(self):
        with pytest.raises(PreconditionError):
            sample_config_from(resolve("sample", overrides={"sample.solver": "ode"}))

    def test_evaluation_settings(self):
        run = resolve("eval", overrides={"eval.statistics": "degree, orbit", "eval.bw_orbit": 10.0})
        assert statistics_from(run) == ["degree", "orbit"]
        assert bandwidths_from(run)["orbit"] == 10.0


def test_manifest(tmp_path):
    run = resolve("eval", overrides={"sample.M": 12}, seed=6, out=str(tmp_path))
    path = write_manifest(run, {"metrics": "metrics.csv"})
    manifest = json.loads(open(path, encoding="utf-8").read())
    assert manifest["command"] == "eval"
    assert manifest["seed"] == 6
    assert manifest["version"] == __version__
    assert manifest["config"]["sample.M"] == 12
    assert manifest["outputs"] == {"metrics": "metrics.csv"}
