import json
import os
import xml.etree.ElementTree as ET

import pandas as pd
import pytest

from GSDM.cli import ABLATION_AXES, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from GSDM.datasets import load_dataset

SMALL = ["dataset.name=erdos_renyi", "dataset.count=8", "dataset.n_min=6", "dataset.n_max=6"]
TINY_MODEL = ["model.hidden=4", "model.time_dim=4", "train.epochs=1", "train.batch_size=3"]


def _manifest(out):
    with open(os.path.join(out, "manifest.json"), encoding="utf-8") as handle:
        return json.load(handle)


@pytest.fixture
def data_dir(tmp_path):
    out = str(tmp_path / "run")
    assert main(["gen-data", "--out", out, "--seed", "4", *SMALL]) == EXIT_OK
    return out


class TestGenData:
    def test_writes_split_files_and_manifest(self, data_dir):
        train = load_dataset(os.path.join(data_dir, "data", "erdos_renyi.train.jsonl"))
        test = load_dataset(os.path.join(data_dir, "data", "erdos_renyi.test.jsonl"))
        assert (len(train), len(test)) == (6, 2)
        manifest = _manifest(data_dir)
        assert manifest["command"] == "gen-data" and manifest["seed"] == 4
        assert manifest["outputs"]["train_count"] == 6
        assert os.path.exists(os.path.join(data_dir, "run.log"))

    def test_same_seed_same_bytes(self, data_dir, tmp_path):
        again = str(tmp_path / "again")
        assert main(["gen-data", "--out", again, "--seed", "4", *SMALL]) == EXIT_OK
        for name in ("erdos_renyi.train.jsonl", "erdos_renyi.test.jsonl"):
            with open(os.path.join(data_dir, "data", name), "rb") as a, open(os.path.join(again, "data", name), "rb") as b:
                assert a.read() == b.read()

    def test_unknown_dataset(self, tmp_path):
        assert main(["gen-data", "--out", str(tmp_path), "--dataset", "zinc250k"]) == EXIT_USAGE

    def test_config_file(self, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("\n".join(SMALL) + "\ndataset.count = 5\n", encoding="utf-8")
        out = str(tmp_path / "cfg")
        assert main(["gen-data", "--config", str(config), "--out", out]) == EXIT_OK
        assert _manifest(out)["outputs"]["train_count"] + _manifest(out)["outputs"]["test_count"] == 5


class TestUsage:
    def test_no_command(self):
        assert main([]) == EXIT_USAGE

    def test_malformed_override(self, tmp_path):
        assert main(["eval", "--out", str(tmp_path), "statistics"]) == EXIT_USAGE

    def test_bad_seed(self, tmp_path):
        assert main(["gen-data", "--out", str(tmp_path), "--seed", "-3"]) == EXIT_USAGE

    def test_unknown_axis(self, tmp_path):
        assert main(["ablate", "--out", str(tmp_path), "--axis", "depth"]) == EXIT_USAGE

    def test_train_without_data(self, tmp_path):
        assert main(["train", "--out", str(tmp_path), *SMALL]) == EXIT_USAGE

    def test_sample_without_checkpoint(self, data_dir):
        assert main(["sample", "--out", data_dir, *SMALL]) == EXIT_USAGE

    def test_corrupt_config_file(self, tmp_path):
        config = tmp_path / "broken.cfg"
        config.write_text("just words\n", encoding="utf-8")
        assert main(["eval", "--config", str(config), "--out", str(tmp_path)]) == EXIT_RUNTIME


class TestPipeline:
    def test_train_sample_eval(self, data_dir):
        assert main(["train", "--out", data_dir, *SMALL, *TINY_MODEL]) == EXIT_OK
        for name in ("model.ckpt", "loss_history.csv", "loss.svg"):
            assert os.path.exists(os.path.join(data_dir, name))
        history = pd.read_csv(os.path.join(data_dir, "loss_history.csv"))
        assert list(history.columns) == ["epoch", "step", "loss", "loss_X", "loss_Lambda"]

        assert main(["sample", "--out", data_dir, "--steps", "5", "--alpha", "0.5", *SMALL, *TINY_MODEL]) == EXIT_OK
        generated = load_dataset(os.path.join(data_dir, "generated.jsonl"))
        assert len(generated) == 2 and all(g.n == 6 and g.is_binary() for g in generated)
        timing = pd.read_csv(os.path.join(data_dir, "timing.csv"))
        assert list(timing.columns) == ["chain", "n", "ms"]

        assert main(["eval", "--out", data_dir, *SMALL]) == EXIT_OK
        metrics = pd.read_csv(os.path.join(data_dir, "metrics.csv"))
        assert metrics["statistic"].tolist() == ["degree", "clustering", "orbit", "avg"]
        ET.parse(os.path.join(data_dir, "metrics.svg"))
        ET.parse(os.path.join(data_dir, "loss.svg"))

    def test_sample_rejects_other_variant(self, data_dir):
        assert main(["train", "--out", data_dir, *SMALL, *TINY_MODEL]) == EXIT_OK
        assert main(["sample", "--out", data_dir, "--variant", "fullrank", "--steps", "3", *SMALL]) == EXIT_USAGE

    def test_resume(self, data_dir):
        checkpoints = os.path.join(data_dir, "checkpoints")
        assert main(["train", "--out", data_dir, *SMALL, *TINY_MODEL, "train.max_steps=1"]) == EXIT_OK
        first = os.path.join(checkpoints, "checkpoint_000001.ckpt")
        assert os.path.exists(first)
        assert main(["train", "--out", data_dir, "--resume", first, *SMALL, *TINY_MODEL, "train.epochs=2"]) == EXIT_OK
        history = pd.read_csv(os.path.join(data_dir, "loss_history.csv"))
        assert history["step"].iloc[0] == 2

    def test_eval_against_itself_is_zero(self, data_dir):
        test_path = os.path.join(data_dir, "data", "erdos_renyi.test.jsonl")
        assert main(["eval", "--out", data_dir, *SMALL, f"eval.generated={test_path}"]) == EXIT_OK
        metrics = pd.read_csv(os.path.join(data_dir, "metrics.csv"))
        assert (metrics["mmd"] == 0.0).all()

    def test_weighted_datasets_use_adjacency_mmd(self, tmp_path):
        out = str(tmp_path / "spectrum")
        spectrum = ["dataset.name=synthetic_spectrum", "dataset.count=6", "dataset.n_min=5", "dataset.n_max=5"]
        assert main(["gen-data", "--out", out, *spectrum]) == EXIT_OK
        test_path = os.path.join(out, "data", "synthetic_spectrum.test.jsonl")
        assert main(["eval", "--out", out, *spectrum, f"eval.generated={test_path}"]) == EXIT_OK
        metrics = pd.read_csv(os.path.join(out, "metrics.csv"))
        assert metrics["statistic"].tolist() == ["adjacency", "avg"]


@pytest.mark.slow
def test_alpha_ablation(data_dir):
    assert main(["ablate", "--out", data_dir, "--axis", "alpha", *SMALL, *TINY_MODEL,
                 "sample.M=5", "ablate.count=2"]) == EXIT_OK
    table = pd.read_csv(os.path.join(data_dir, "ablation_alpha.csv"))
    avg = table[table["statistic"] == "avg"]
    assert sorted(avg["value"].tolist()) == ABLATION_AXES["alpha"]
    assert "ms_per_graph" in table.columns
    ET.parse(os.path.join(data_dir, "ablation_alpha.svg"))


@pytest.mark.slow
def test_verify_quick(tmp_path):
    assert main(["verify", "--quick", "--out", str(tmp_path)]) == EXIT_OK
    report = pd.read_csv(os.path.join(str(tmp_path), "verify.csv"))
    assert report["passed"].all()
