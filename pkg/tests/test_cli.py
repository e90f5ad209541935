import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acca import config as cfgmod
from acca.cli import main
from acca.config import ConfigError, DatasetSection, ExperimentConfig, ModelSection, TrainSection
from acca.datasets import write_idx
from acca.experiments import load_dataset
from acca.metrics import pixel_accuracy
from acca.training import build_model, load_model_into, reconstruct_both

TINY_TOY = """
[dataset]
n_train = 240
n_test = 80
[model]
enc_hidden = 12
dec_hidden = 12
disc_hidden = 12
d = 3
prior = gmm
[train]
epochs = 2
batch_size = 60
probe_every = 2
probe_size = 60
"""


def _write_cfg(tmp_path, text, name="c.ini"):
    path = tmp_path / name
    path.write_text(text + f"\n[output]\ndir = {tmp_path / 'run'}\n")
    return path


# -------------------------------------------------------------------- config


@st.composite
def configs(draw):
    small = st.integers(1, 512)
    widths = st.lists(small, min_size=1, max_size=3).map(tuple)
    return ExperimentConfig(
        dataset=DatasetSection(
            n_train=draw(st.integers(1, 10**5)), toy_seed=draw(st.integers(0, 2**31)),
            standardize=draw(st.booleans()),
            mask_quadrants=tuple(draw(st.lists(st.sampled_from([1, 2, 3, 4]), max_size=4))),
            mask_fill=draw(st.floats(0, 1)), axis=draw(st.sampled_from(["left-right", "top-bottom"])),
        ),
        model=ModelSection(
            kind=draw(st.sampled_from(["acca", "acca_nocv", "bivcca", "mvae"])),
            enc_hidden=draw(widths), dec_hidden=draw(widths), lam=draw(st.floats(0, 1)),
            d=draw(small), prior=draw(st.sampled_from(["gaussian", "gmm"])),
            recon_weights=tuple(draw(st.lists(st.floats(0, 10), min_size=3, max_size=3))),
        ),
        train=TrainSection(epochs=draw(small), lr=draw(st.floats(1e-6, 1.0)), seed=draw(st.integers(0, 2**31))),
    )


@settings(max_examples=60, deadline=None)
@given(configs())
def test_config_round_trip(cfg):
    text = cfgmod.dumps(cfg)
    again = cfgmod.loads(text)
    assert again == cfg
    assert cfgmod.dumps(again) == text


def test_config_errors():
    with pytest.raises(ConfigError, match="unknown key"):
        cfgmod.loads("[train]\nepoch = 3\n")
    with pytest.raises(ConfigError, match="cannot read"):
        cfgmod.loads("[train]\nepochs = many\n")
    with pytest.raises(ConfigError, match="unknown section"):
        cfgmod.loads("[trainer]\n")
    with pytest.raises(ConfigError, match="lambda"):
        cfgmod.loads("[model]\nlam = 2\n")


def test_config_missing_dataset_path(tmp_path):
    path = _write_cfg(tmp_path, f"[dataset]\nkind = mnist\ntrain_images = {tmp_path / 'x'}\n")
    with pytest.raises(ConfigError, match="train_images"):
        cfgmod.load(path)


# ----------------------------------------------------------------------- cli


def test_toy_pipeline(tmp_path, capsys):
    path = _write_cfg(tmp_path, TINY_TOY)
    run = tmp_path / "run"
    assert main(["gen-toy", "--config", str(path)]) == 0
    assert main(["train", "--config", str(path)]) == 0
    assert main(["eval", "--config", str(path)]) == 0
    rows = (run / "metrics.csv").read_text().splitlines()
    assert rows[0] == "metric,value,dataset,model,seed"
    assert sum(r.startswith("nhsic_") for r in rows) == 2
    assert main(["embed", "--config", str(path)]) == 0
    for cmd in ("gen-toy", "train", "eval", "embed"):
        meta = json.loads((run / f"{cmd}.meta.json").read_text())
        assert meta["config_hash"] == cfgmod.load(path).hash() and meta["seed"] == 0 and meta["version"]

    assert main(["plot", "--trace", str(run / "trace.csv"), "--out", str(tmp_path / "plots")]) == 0
    svg = (tmp_path / "plots" / "trace.svg").read_text()
    n_trace = len((run / "trace.csv").read_text().splitlines()) - 1
    assert svg.count('class="series"') == 2
    assert svg.count('data-series="mmd_sum"') == n_trace
    assert svg.count('data-series="cmi"') == n_trace


def test_rerun_gives_identical_csvs(tmp_path):
    outputs = []
    for i in range(2):
        path = tmp_path / f"c{i}.ini"
        path.write_text(TINY_TOY + f"\n[output]\ndir = {tmp_path / f'run{i}'}\n")
        for cmd in ("gen-toy", "train", "eval", "embed"):
            assert main([cmd, "--config", str(path)]) == 0
        outputs.append(tmp_path / f"run{i}")
    names = ["toy_train.csv", "trace.csv", "metrics.csv", "embed_test_x.csv", "model.bin"]
    for name in names:
        assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes()


def test_output_root_env(tmp_path, monkeypatch):
    path = tmp_path / "c.ini"
    path.write_text(TINY_TOY)
    monkeypatch.setenv("ACCA_OUTPUT_ROOT", str(tmp_path / "root"))
    assert main(["gen-toy", "--config", str(path)]) == 0
    assert (tmp_path / "root" / cfgmod.load(path).hash() / "toy_train.csv").exists()


def test_exit_codes(tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "missing.ini")]) == 2
    bad = _write_cfg(tmp_path, "[model]\nkind = dcca\n", "bad.ini")
    assert main(["train", "--config", str(bad)]) == 2
    assert "kind" in capsys.readouterr().err

    path = _write_cfg(tmp_path, TINY_TOY)
    assert main(["eval", "--config", str(path)]) == 3  # no checkpoint yet

    assert main(["train", "--config", str(path)]) == 0
    other = _write_cfg(tmp_path, TINY_TOY.replace("prior = gmm", "prior = gaussian"), "other.ini")
    assert main(["eval", "--config", str(other), "--checkpoint", str(tmp_path / "run" / "model")]) == 2
    assert "prior" in capsys.readouterr().err

    huge = _write_cfg(tmp_path, TINY_TOY + "\nlr = 1e300\n", "huge.ini")
    with np.errstate(all="ignore"):
        assert main(["train", "--config", str(huge), "--out", str(tmp_path / "huge")]) == 4


@pytest.fixture
def tiny_mnist(tmp_path):
    rng = np.random.default_rng(0)
    paths = {}
    for split, n in (("train", 120), ("test", 40)):
        imgs = (rng.random((n, 28, 28)) * 255).astype(np.uint8)
        labels = rng.integers(0, 3, n)
        paths[f"{split}_images"] = tmp_path / f"{split}-images"
        paths[f"{split}_labels"] = tmp_path / f"{split}-labels"
        write_idx(paths[f"{split}_images"], paths[f"{split}_labels"], imgs, labels)
    text = "[dataset]\nkind = mnist\nstandardize = false\n" + "".join(f"{k} = {v}\n" for k, v in paths.items())
    text += ("[model]\nenc_hidden = 8\ndec_hidden = 8\ndisc_hidden = 8\nd = 2\nlikelihood = bernoulli\n"
             "[train]\nepochs = 1\nbatch_size = 40\n"
             "[eval]\nmetrics = nhsic,misalignment,kmeans,probe\n")
    return _write_cfg(tmp_path, text)


def test_recover_all_quadrants_matches_grey_input(tiny_mnist, tmp_path, capsys):
    assert main(["train", "--config", str(tiny_mnist)]) == 0
    assert main(["recover", "--config", str(tiny_mnist), "--quadrants", "1,2,3,4"]) == 0
    got = json.loads((tmp_path / "run" / "recovery_q1234.json").read_text())["pixel_accuracy"]

    cfg = cfgmod.load(tiny_mnist)
    train_ds, test_ds = load_dataset(cfg)
    model = build_model(cfg.train_config(), 392, 392)
    load_model_into(model, tmp_path / "run" / "model")
    grey = np.full_like(test_ds.X, 0.5)
    x_hat, y_hat = reconstruct_both(model, "x", grey)
    truth = np.concatenate([test_ds.X.reshape(-1, 28, 14), test_ds.Y.reshape(-1, 28, 14)], axis=2)
    expected = pixel_accuracy(np.concatenate([x_hat.reshape(-1, 28, 14), y_hat.reshape(-1, 28, 14)], axis=2), truth)
    assert got == expected

    assert main(["eval", "--config", str(tiny_mnist)]) == 0
    values = json.loads((tmp_path / "run" / "metrics.json").read_text())["values"]
    assert {"nhsic_linear", "misalignment", "kmeans_purity", "probe_accuracy"} <= set(values)


def test_recover_rejects_bad_quadrant(tiny_mnist):
    assert main(["recover", "--config", str(tiny_mnist), "--quadrants", "5"]) == 2
