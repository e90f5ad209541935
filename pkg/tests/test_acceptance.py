"""End-to-end acceptance checks, one test per criterion.

The training-based checks run the desk configuration (toy: 256/256 MLPs,
d=10, batch 256; halved MNIST: 512/512 MLPs, batch 256) for 20 epochs, which
takes roughly half an hour on one CPU core. Results are cached per module so
the MMD and CMI trend checks reuse the ACCA(GM) toy run.
"""

import numpy as np
import pytest
from scipy.linalg import subspace_angles

from acca import config as cfgmod
from acca.cli import main
from acca.experiments import load_dataset, recovery_by_count
from acca.metrics import KernelSpec, cmi_ksg, misalignment_degree, mmd2, nhsic
from acca.models import (
    AccaModel,
    BivccaModel,
    MvaeModel,
    PriorSpec,
    acca_discriminator_loss,
    acca_encoder_adversarial_loss,
    acca_reconstruction_loss,
    bivcca_loss,
    kl_diag_gaussian,
    linear_cca_fit,
    mvae_loss,
    pcca_fit_em,
)
from acca.nn import MlpSpec
from acca.training import build_model, embed, train

from conftest import grad_check
from mnist_data import build_idx

pytestmark = pytest.mark.slow

EPOCHS = 20
SEEDS = (0, 1, 2)
TOY_VARIANTS = {
    "acca_gm": dict(kind="acca", prior="gmm"),
    "acca_g": dict(kind="acca", prior="gaussian"),
    "acca_nocv": dict(kind="acca_nocv", prior="gaussian"),
    "bivcca": dict(kind="bivcca", prior="gaussian"),
}


def _toy_cfg(variant: str, seed: int, probe_every: int = 0) -> cfgmod.ExperimentConfig:
    cfg = cfgmod.toy_default()
    cfg = cfg.with_section("model", **TOY_VARIANTS[variant])
    return cfg.with_section("train", epochs=EPOCHS, seed=seed, probe_every=probe_every)


@pytest.fixture(scope="module")
def toy_runs():
    """Test nHSIC (linear) for every variant and seed, plus the probed ACCA(GM) trace."""
    scores, traces = {}, {}
    for seed in SEEDS:
        for variant in TOY_VARIANTS:
            probe = 64 if variant == "acca_gm" and seed == 0 else 0
            cfg = _toy_cfg(variant, seed, probe)
            train_ds, test_ds = load_dataset(cfg)
            model = build_model(cfg.train_config(), 50, 50)
            _, trace = train(model, train_ds, cfg.train_config(), probe_data=test_ds)
            emb = embed(model, test_ds)
            scores[variant, seed] = nhsic(emb.Z_x, emb.Z_y, KernelSpec("linear"))
            if probe:
                traces[variant] = trace
            print(f"toy {variant} seed={seed} nhsic_linear={scores[variant, seed]:.4f}")
    return scores, traces


@pytest.fixture(scope="module")
def mnist_cfg(tmp_path_factory):
    pytest.importorskip("mlxtend")
    paths = build_idx(tmp_path_factory.mktemp("mnist"))
    cfg = cfgmod.mnist_default(**{k: str(v) for k, v in paths.items()})
    return cfg.with_section("train", epochs=EPOCHS)


def _mnist_model(cfg, kind, d, seed):
    cfg = cfg.with_section("model", kind=kind, d=d).with_section("train", seed=seed)
    train_ds, test_ds = load_dataset(cfg)
    model = build_model(cfg.train_config(), train_ds.X.shape[1], train_ds.Y.shape[1])
    train(model, train_ds, cfg.train_config())
    return model, test_ds


# ------------------------------------------------------------ trained models


def test_toy_nhsic_ordering_holds_over_three_seeds(toy_runs):
    scores, _ = toy_runs
    for seed in SEEDS:
        s = {v: scores[v, seed] for v in TOY_VARIANTS}
        assert s["acca_gm"] > s["acca_g"], f"seed {seed}: {s}"
        for v in ("acca_gm", "acca_g", "acca_nocv"):
            assert s[v] > s["bivcca"], f"seed {seed}: {s}"


def test_toy_encoding_mmd_falls_below_a_fifth(toy_runs):
    mmd = toy_runs[1]["acca_gm"].column("mmd_sum")
    print(f"mmd_sum first={mmd[0]:.4f} final={mmd[-1]:.4f}")
    assert mmd[-1] < 0.2 * mmd[0]


def test_toy_conditional_mi_below_tenth_nat(toy_runs):
    cmi = toy_runs[1]["acca_gm"].column("cmi")
    print(f"cmi first={cmi[0]:.4f} final={cmi[-1]:.4f}")
    assert cmi[-1] < 0.1


def test_mnist_misalignment_acca_below_bivcca(mnist_cfg):
    deltas = {}
    for seed in SEEDS:
        for kind in ("acca", "bivcca"):
            model, test_ds = _mnist_model(mnist_cfg, kind, 2, seed)
            emb = embed(model, test_ds)
            deltas[kind, seed] = misalignment_degree(emb.Z_x, emb.Z_y)
        print(f"mnist d=2 seed={seed} acca={deltas['acca', seed]:.4f} bivcca={deltas['bivcca', seed]:.4f}")
    for seed in SEEDS:
        assert deltas["acca", seed] < deltas["bivcca", seed], f"seed {seed}: {deltas}"


def test_mnist_recovery_ordering_and_monotone_in_masked_quadrants(mnist_cfg):
    acc = {}
    for kind in ("acca", "bivcca"):
        model, test_ds = _mnist_model(mnist_cfg, kind, mnist_cfg.model.d, 0)
        assert len(test_ds) == 1000
        acc[kind] = recovery_by_count(model, test_ds, counts=(1, 2, 3))
    print(f"mnist recovery pixel accuracy {acc}")
    for kind, by_k in acc.items():
        assert by_k[1] >= by_k[2] >= by_k[3], f"{kind}: {by_k}"
    assert acc["acca"][1] > acc["bivcca"][1]


# ---------------------------------------------------------- analytic suites


def test_estimator_suite():
    rng = np.random.default_rng(0)
    Z = rng.standard_normal((300, 4))
    for k in (KernelSpec("linear"), KernelSpec("rbf")):
        assert abs(nhsic(Z, Z, k) - 1.0) <= 1e-9
    assert abs(mmd2(Z, Z, 1.0, biased=True)) <= 1e-12
    a = rng.standard_normal(10_000)
    b = rng.standard_normal(10_000) + 5.0
    assert abs(mmd2(a, b, 1.0) - 1.137) <= 0.02
    X, Y, C = (rng.standard_normal(5000) for _ in range(3))
    assert abs(cmi_ksg(X, Y, C, k=3)) <= 0.05
    Y2 = X + 0.1 * rng.standard_normal(5000)
    assert abs(cmi_ksg(X, Y2, C, k=3) - 0.5 * np.log(101)) <= 0.3
    assert kl_diag_gaussian(np.zeros((2, 3)), np.zeros((2, 3))).item() == 0.0
    assert abs(kl_diag_gaussian([1.0], [0.0]).item() - 0.5) <= 1e-12
    assert abs(kl_diag_gaussian([0.0], [1.0]).item() - (np.e - 2) / 2) <= 1e-12
    assert misalignment_degree(Z, Z) == 0.0
    assert abs(misalignment_degree([[1.0, 0.0]], [[0.0, 1.0]]) - 1.0) <= 1e-12
    t30, t60 = np.radians(30), np.radians(60)
    zx = np.array([[1.0, 0.0], [1.0, 0.0]])
    zy = np.array([[np.cos(t30), np.sin(t30)], [np.cos(t60), np.sin(t60)]])
    assert abs(misalignment_degree(zx, zy) - 0.75) <= 1e-12


def test_solver_suite():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((1000, 5))
    assert np.all(np.abs(linear_cca_fit(X, X, d=5, reg=0.0).correlations - 1.0) <= 1e-8)
    x = rng.standard_normal(500)
    y = 0.4 * x + rng.standard_normal(500)
    rho = linear_cca_fit(x[:, None], y[:, None], d=1, reg=0.0).correlations[0]
    assert abs(rho - abs(np.corrcoef(x, y)[0, 1])) <= 1e-10

    W_x, W_y = rng.standard_normal((2, 10, 2))
    z = rng.standard_normal((10_000, 2))
    Xp = z @ W_x.T + 0.5 * rng.standard_normal((10_000, 10))
    Yp = z @ W_y.T + 0.5 * rng.standard_normal((10_000, 10))
    fit = pcca_fit_em(Xp, Yp, d=2)
    assert np.all(np.diff(fit.loglik) >= -1e-9)
    assert np.degrees(subspace_angles(fit.W, np.vstack([W_x, W_y]))).max() < 5.0


def test_gradient_suite_on_twenty_configurations():
    worst = 0.0
    for i in range(20):
        rng = np.random.default_rng(100 + i)
        dx, dy, d = rng.integers(2, 6, 3)
        n = int(rng.integers(3, 6))
        spec = MlpSpec(tuple(int(w) for w in rng.integers(3, 7, rng.integers(1, 3))), "leaky_relu")
        x, y = rng.standard_normal((n, dx)), rng.standard_normal((n, dy))
        mvae = MvaeModel.build(dx, dy, d, spec, spec, rng)
        worst = max(worst, grad_check(lambda: mvae_loss(mvae, x, y), list(mvae.named_parameters().values())))
        bv = BivccaModel.build(dx, dy, d, spec, spec, rng, lam=float(rng.random()), n_samples=2)
        eps = bv.draw_noise(n, i)
        worst = max(worst, grad_check(lambda: bivcca_loss(bv, x, y, eps=eps), list(bv.named_parameters().values())))
        gan = ("standard", "lsgan")[i % 2]
        acca = AccaModel.build(dx, dy, PriorSpec("gmm", d), spec, spec, spec, rng, gan=gan)
        prior = acca.prior.sample(n, rng)
        enc = acca.parameters_of(*acca.encoder_names)
        recon = enc + acca.parameters_of("dec_x", "dec_y")
        worst = max(worst, grad_check(lambda: acca_reconstruction_loss(acca, x, y), recon))
        worst = max(worst, grad_check(lambda: acca_discriminator_loss(acca, x, y, prior), acca.parameters_of("disc")))
        worst = max(worst, grad_check(lambda: acca_encoder_adversarial_loss(acca, x, y), enc))
    print(f"worst relative gradient error {worst:.2e}")
    assert worst < 1e-4


def test_identical_runs_are_bit_identical(tmp_path):
    outputs = []
    for run in range(2):
        cfg = _toy_cfg("acca_gm", 0, probe_every=16).with_section("train", epochs=2)
        cfg = cfg.with_section("output", dir=str(tmp_path / f"run{run}"))
        path = tmp_path / f"cfg{run}.ini"
        cfgmod.save(cfg, path)
        for cmd in ("train", "eval"):
            assert main([cmd, "--config", str(path)]) == 0
        outputs.append(tmp_path / f"run{run}")
    for name in ("model.bin", "model.manifest", "trace.csv", "metrics.csv"):
        assert (outputs[0] / name).read_bytes() == (outputs[1] / name).read_bytes(), name
