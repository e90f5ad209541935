import numpy as np
import pytest
from scipy.linalg import subspace_angles

from acca import tensor as T
from acca.models import (
    AccaModel,
    BivccaModel,
    MvaeModel,
    PriorSpec,
    SingularCovarianceError,
    acca_discriminator_loss,
    acca_encoder_adversarial_loss,
    acca_reconstruction_loss,
    bivcca_loss,
    kl_diag_gaussian,
    linear_cca_fit,
    model_manifest,
    mvae_loss,
    pcca_fit_em,
    r_gan,
    recon_nll,
    vcca_loss,
)
from acca.nn import MlpSpec
from acca.tensor import ShapeError, Tensor

from conftest import grad_check

SMALL = MlpSpec((6,), "leaky_relu")
SMOOTH = MlpSpec((6,), "tanh")


def _zero_output(net):
    net.weights[-1].data[:] = 0.0
    net.biases[-1].data[:] = 0.0


def _acca(rng, joint=True, gan="standard", spec=SMALL, d=3, likelihood="gaussian"):
    return AccaModel.build(5, 4, PriorSpec("gaussian", d), spec, spec, spec, rng, joint=joint, gan=gan, likelihood=likelihood)


# ---------------------------------------------------------------- linear CCA


def test_cca_identical_views(rng):
    X = rng.standard_normal((500, 4))
    res = linear_cca_fit(X, X, d=4, reg=0.0)
    np.testing.assert_allclose(res.correlations, 1.0, atol=1e-8)


def test_cca_independent_views():
    rng = np.random.default_rng(0)
    res = linear_cca_fit(rng.standard_normal((100_000, 3)), rng.standard_normal((100_000, 3)), d=1)
    assert res.correlations[0] < 0.05


def test_cca_scalar_views_match_pearson(rng):
    x = rng.standard_normal(300)
    y = -0.7 * x + rng.standard_normal(300)
    res = linear_cca_fit(x[:, None], y[:, None], d=1, reg=0.0)
    assert res.correlations[0] == pytest.approx(abs(np.corrcoef(x, y)[0, 1]), abs=1e-10)


def test_cca_recentering_invariance(rng):
    X = rng.standard_normal((400, 5))
    Y = X[:, :3] @ rng.standard_normal((3, 4)) + rng.standard_normal((400, 4))
    a = linear_cca_fit(X, Y, d=3).correlations
    b = linear_cca_fit(X + 7.5, Y - 3.0, d=3).correlations
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_cca_projection_properties(rng):
    X = rng.standard_normal((2000, 5))
    Y = X[:, :2] @ rng.standard_normal((2, 4)) + rng.standard_normal((2000, 4))
    res = linear_cca_fit(X, Y, d=3, reg=0.0)
    assert np.all(np.diff(res.correlations) <= 0)
    Px, Py = res.transform(X, Y)
    np.testing.assert_allclose(np.cov(Px.T), np.eye(3), atol=1e-8)
    np.testing.assert_allclose(np.cov(Py.T), np.eye(3), atol=1e-8)


def test_cca_singular_advises_ridge(rng):
    X = rng.standard_normal((100, 2))
    X = np.hstack([X, X[:, :1]])
    with pytest.raises(SingularCovarianceError, match="reg > 0"):
        linear_cca_fit(X, rng.standard_normal((100, 3)), d=1, reg=0.0)


# ---------------------------------------------------------------------- PCCA


@pytest.mark.parametrize("seed", range(3))
def test_pcca_loglik_nondecreasing(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((200, 4)) @ rng.standard_normal((4, 4))
    Y = rng.standard_normal((200, 3)) + X[:, :3]
    fit = pcca_fit_em(X, Y, d=2, iters=200, tol=0.0, seed=seed)
    assert np.all(np.diff(fit.loglik) >= -1e-9)
    assert np.all(fit.psi_x > 0) and np.all(fit.psi_y > 0)


def test_pcca_recovers_column_space():
    rng = np.random.default_rng(1)
    W_x, W_y = rng.standard_normal((2, 10, 2))
    z = rng.standard_normal((10_000, 2))
    X = z @ W_x.T + 1.0 + 0.5 * rng.standard_normal((10_000, 10))
    Y = z @ W_y.T - 2.0 + 0.5 * rng.standard_normal((10_000, 10))
    fit = pcca_fit_em(X, Y, d=2)
    angles = np.degrees(subspace_angles(fit.W, np.vstack([W_x, W_y])))
    assert angles.max() < 5.0


def test_pcca_embeddings_shape(rng):
    X, Y = rng.standard_normal((2, 50, 4))
    fit = pcca_fit_em(X, Y, d=2, iters=20)
    assert fit.embed_x(X).shape == (50, 2) and fit.embed_joint(X, Y).shape == (50, 2)


# ---------------------------------------------------------------------- MVAE


def test_mvae_zero_decoders_hand_case(rng):
    model = MvaeModel.build(2, 2, 2, SMALL, SMALL, rng)
    _zero_output(model.dec_x)
    _zero_output(model.dec_y)
    x = np.array([[1.0, 2.0], [0.0, -1.0]])
    y = np.array([[3.0, 0.0], [1.0, 1.0]])
    # rows: 2 * (5 + 9) = 28 and 2 * (1 + 2) = 6
    assert mvae_loss(model, x, y).item() == pytest.approx(17.0)


def test_mvae_perfect_model_is_zero():
    rng = np.random.default_rng(0)
    model = MvaeModel.build(2, 2, 2, MlpSpec((), "identity"), MlpSpec((), "identity"), rng)
    for net in (model.enc_x, model.enc_y, model.dec_x, model.dec_y):
        net.weights[0].data[:] = np.eye(2)
    x = rng.standard_normal((4, 2))
    assert mvae_loss(model, x, x.copy()).item() == 0.0


def test_mvae_gradient(rng):
    model = MvaeModel.build(3, 2, 2, SMOOTH, SMOOTH, rng)
    x, y = rng.standard_normal((4, 3)), rng.standard_normal((4, 2))
    assert grad_check(lambda: mvae_loss(model, x, y), list(model.named_parameters().values())) < 1e-4


# ------------------------------------------------------------------ Bi-VCCA


def test_kl_examples():
    assert kl_diag_gaussian(np.zeros((3, 2)), np.zeros((3, 2))).item() == 0.0
    assert kl_diag_gaussian([1.0], [0.0]).item() == pytest.approx(0.5)
    assert kl_diag_gaussian([0.0], [1.0]).item() == pytest.approx((np.e - 2) / 2)


def test_kl_gradient(rng):
    mu = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
    lv = Tensor(0.5 * rng.standard_normal((4, 3)), requires_grad=True)
    assert grad_check(lambda: kl_diag_gaussian(mu, lv), [mu, lv]) < 1e-4


def test_bivcca_lambda_one_is_vcca(rng):
    model = BivccaModel.build(3, 4, 2, SMALL, SMALL, rng, lam=1.0, n_samples=2)
    x, y = rng.standard_normal((5, 3)), rng.standard_normal((5, 4))
    eps = model.draw_noise(5, 9)
    assert bivcca_loss(model, x, y, eps=eps).item() == pytest.approx(vcca_loss(model, x, y, eps=eps).item(), abs=1e-12)


def test_bivcca_deterministic_perfect_decoders_leaves_kl():
    rng = np.random.default_rng(2)
    lin = MlpSpec((), "identity")
    model = BivccaModel.build(2, 2, 2, lin, lin, rng, lam=0.3)
    mu_map = np.array([[1.0, 0, -30.0, 0], [0, 1.0, 0, -30.0]])
    model.enc_x.weights[0].data[:] = mu_map
    model.enc_y.weights[0].data[:] = mu_map
    # logvar = -30 everywhere, through the bias; the weights above feed x into it too
    model.enc_x.weights[0].data[:, 2:] = 0.0
    model.enc_y.weights[0].data[:, 2:] = 0.0
    model.enc_x.biases[0].data[:, 2:] = -30.0
    model.enc_y.biases[0].data[:, 2:] = -30.0
    model.dec_x.weights[0].data[:] = np.eye(2)
    model.dec_y.weights[0].data[:] = np.eye(2)
    x = rng.standard_normal((6, 2))
    loss = bivcca_loss(model, x, x.copy(), seed=0).item()
    kl = kl_diag_gaussian(x, np.full_like(x, -30.0)).item()
    assert loss == pytest.approx(kl, abs=1e-9)


def test_bivcca_gradient_with_frozen_noise(rng):
    model = BivccaModel.build(3, 2, 2, SMOOTH, SMOOTH, rng, lam=0.4, n_samples=2)
    x, y = rng.standard_normal((4, 3)), rng.standard_normal((4, 2))
    eps = model.draw_noise(4, 1)
    params = list(model.named_parameters().values())
    assert grad_check(lambda: bivcca_loss(model, x, y, eps=eps), params) < 1e-4


def test_bivcca_validates_lambda(rng):
    with pytest.raises(ValueError):
        BivccaModel.build(2, 2, 1, SMALL, SMALL, rng, lam=1.5)


# ---------------------------------------------------------------------- ACCA


def test_acca_shapes_and_validation(rng):
    m = _acca(rng)
    assert m.enc_xy.in_dim == 9 and m.kind == "acca"
    assert _acca(rng, joint=False).kind == "acca_nocv"
    with pytest.raises(ShapeError):
        AccaModel(m.enc_x, m.enc_y, m.enc_xy, m.dec_x, m.dec_y, m.disc, PriorSpec("gaussian", 4))


def test_acca_perfect_autoencoder_zero_recon():
    rng = np.random.default_rng(0)
    lin = MlpSpec((), "identity")
    m = AccaModel.build(2, 2, PriorSpec("gaussian", 2), lin, lin, lin, rng)
    for net in (m.enc_x, m.enc_y, m.dec_x, m.dec_y):
        net.weights[0].data[:] = np.eye(2)
    m.enc_xy.weights[0].data[:] = np.vstack([np.eye(2), np.zeros((2, 2))])
    x = rng.standard_normal((5, 2))
    assert acca_reconstruction_loss(m, x, x.copy()).item() == 0.0


def test_acca_nocv_drops_joint_term(rng):
    m = _acca(rng)
    nocv = AccaModel(m.enc_x, m.enc_y, None, m.dec_x, m.dec_y, m.disc, m.prior)
    x, y = rng.standard_normal((6, 5)), rng.standard_normal((6, 4))
    z = m.encode_xy(x, y)
    joint = recon_nll(m.dec_x(z), x, "gaussian").item() + recon_nll(m.dec_y(z), y, "gaussian").item()
    full = acca_reconstruction_loss(m, x, y).item()
    assert acca_reconstruction_loss(nocv, x, y).item() == pytest.approx(full - joint, abs=1e-10)


@pytest.mark.parametrize("likelihood", ["gaussian", "bernoulli"])
def test_acca_recon_gradient(rng, likelihood):
    m = _acca(rng, spec=SMOOTH, likelihood=likelihood)
    x, y = rng.random((4, 5)), rng.random((4, 4))
    params = m.parameters_of("enc_x", "enc_y", "enc_xy", "dec_x", "dec_y")
    assert grad_check(lambda: acca_reconstruction_loss(m, x, y), params) < 1e-4


@pytest.mark.parametrize("gan", ["standard", "lsgan"])
def test_acca_adversarial_gradients(rng, gan):
    m = _acca(rng, spec=SMOOTH, gan=gan)
    x, y = rng.standard_normal((4, 5)), rng.standard_normal((4, 4))
    prior = m.prior.sample(4, rng)
    assert grad_check(lambda: acca_discriminator_loss(m, x, y, prior), m.parameters_of("disc")) < 1e-4
    enc = m.parameters_of(*m.encoder_names)
    assert grad_check(lambda: acca_encoder_adversarial_loss(m, x, y), enc) < 1e-4


def test_constant_discriminator_values(rng):
    m = _acca(rng)
    _zero_output(m.disc)
    x, y = rng.standard_normal((8, 5)), rng.standard_normal((8, 4))
    prior = m.prior.sample(8, rng)
    assert r_gan(m, x, y, prior).item() == pytest.approx(4 * np.log(0.5), abs=1e-12)
    assert acca_discriminator_loss(m, x, y, prior).item() == pytest.approx(-4 * np.log(0.5), abs=1e-12)
    assert acca_encoder_adversarial_loss(m, x, y).item() == pytest.approx(-3 * np.log(0.5), abs=1e-12)
    np.testing.assert_allclose(m.discriminate(prior).data, 0.5)


def test_separating_discriminator_loss_vanishes(rng):
    lin = MlpSpec((), "identity")
    m = AccaModel.build(5, 4, PriorSpec("gaussian", 1), lin, lin, lin, rng)
    for net in (m.enc_x, m.enc_y, m.enc_xy):
        _zero_output(net)
        net.biases[-1].data[:] = 1000.0
    # score = 30 - z: large on prior draws near 0, very negative at z = 1000
    m.disc.weights[0].data[:] = -1.0
    m.disc.biases[0].data[:] = 30.0
    x, y = rng.standard_normal((8, 5)), rng.standard_normal((8, 4))
    prior = m.prior.sample(8, rng)
    assert acca_discriminator_loss(m, x, y, prior).item() < 1e-10


def test_acca_losses_symmetric_in_encoders(rng):
    m = _acca(rng)
    x, y = rng.standard_normal((6, 5)), rng.standard_normal((6, 4))
    prior = m.prior.sample(6, rng)
    encs = m.encodings(x, y)
    a = acca_discriminator_loss(m, x, y, prior, encodings=encs).item()
    b = acca_discriminator_loss(m, x, y, prior, encodings=encs[::-1]).item()
    c = acca_discriminator_loss(m, x, y, prior, encodings=[encs[1], encs[2], encs[0]]).item()
    assert abs(a - b) < 1e-12 and abs(a - c) < 1e-12


def test_prior_batch_mismatch(rng):
    m = _acca(rng)
    x, y = rng.standard_normal((6, 5)), rng.standard_normal((6, 4))
    with pytest.raises(ShapeError, match="prior batch"):
        acca_discriminator_loss(m, x, y, m.prior.sample(5, rng))


def test_manifest_records_architecture(rng):
    meta = model_manifest(_acca(rng, gan="lsgan"))
    assert meta["gan_kind"] == "lsgan" and meta["prior"].startswith("gaussian")
    assert meta["mlp.enc_xy"].startswith("in=9,out=3")


def test_gmm_prior_moments():
    z = PriorSpec("gmm", 4).sample(50_000, np.random.default_rng(0))
    assert z.shape == (50_000, 4)
    assert z.mean() == pytest.approx(4.9, abs=0.05)
