"""Neural multi-view models and their losses.

All models expose ``encode_x``, ``encode_y``, ``decode_x``, ``decode_y`` and
``named_parameters`` so training, embedding and generation code can treat
them uniformly. Decoders emit raw outputs; for the Bernoulli likelihood these
are logits and ``decode_*`` returns probabilities.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import tensor as T
from ..nn import Mlp, MlpSpec
from ..tensor import ShapeError, Tensor
from .prior import PriorSpec

LIKELIHOODS = ("gaussian", "bernoulli")
GAN_KINDS = ("standard", "lsgan")


def recon_nll(raw: Tensor, target, likelihood: str) -> Tensor:
    """Negative log-likelihood of ``target`` summed over features, averaged over rows.

    Gaussian: unit-variance, additive constant dropped (half squared error).
    Bernoulli: ``raw`` are logits; pixelwise cross-entropy.
    """
    target = T.tensor(target)
    if raw.shape != target.shape:
        raise ShapeError(f"reconstruction shape {raw.shape} != target shape {target.shape}")
    if likelihood == "gaussian":
        per_row = T.sum(T.square(T.sub(raw, target)), axis=1)
        return T.mul(0.5, T.mean(per_row))
    if likelihood == "bernoulli":
        per_row = T.sum(T.sub(T.softplus(raw), T.mul(target, raw)), axis=1)
        return T.mean(per_row)
    raise ValueError(f"unknown likelihood {likelihood!r}")


def _output_mean(raw: Tensor, likelihood: str) -> Tensor:
    return T.sigmoid(raw) if likelihood == "bernoulli" else raw


def _check_paired(x, y):
    if np.shape(x)[0] != np.shape(y)[0]:
        raise ShapeError(f"batch views are not paired: {np.shape(x)[0]} vs {np.shape(y)[0]} rows")


class _TwoViewModel:
    kind = "base"
    likelihood = "gaussian"

    def decode_x(self, z) -> Tensor:
        return _output_mean(self.dec_x(z), self.likelihood)

    def decode_y(self, z) -> Tensor:
        return _output_mean(self.dec_y(z), self.likelihood)

    def named_parameters(self) -> dict[str, Tensor]:
        out = {}
        for name in self.subnetworks:
            net = getattr(self, name)
            if net is not None:
                out.update(net.named_parameters(prefix=f"{name}."))
        return out

    def parameters_of(self, *names: str) -> list[Tensor]:
        out = []
        for name in names:
            net = getattr(self, name)
            if net is not None:
                out.extend(net.parameters())
        return out


# ---------------------------------------------------------------------- MVAE


@dataclass
class MvaeModel(_TwoViewModel):
    enc_x: Mlp
    enc_y: Mlp
    dec_x: Mlp
    dec_y: Mlp
    d: int
    likelihood: str = "gaussian"
    kind = "mvae"
    subnetworks = ("enc_x", "enc_y", "dec_x", "dec_y")

    @classmethod
    def build(cls, d_x, d_y, d, enc: MlpSpec, dec: MlpSpec, rng, likelihood="gaussian"):
        return cls(
            Mlp.build(d_x, d, enc, rng),
            Mlp.build(d_y, d, enc, rng),
            Mlp.build(d, d_x, dec, rng),
            Mlp.build(d, d_y, dec, rng),
            d,
            likelihood,
        )

    def encode_x(self, x) -> Tensor:
        return self.enc_x(x)

    def encode_y(self, y) -> Tensor:
        return self.enc_y(y)


def mvae_loss(model: MvaeModel, x, y) -> Tensor:
    """Self- plus cross-reconstruction squared error, averaged over the batch."""
    _check_paired(x, y)
    zx, zy = model.encode_x(x), model.encode_y(y)
    terms = []
    for z in (zx, zy):
        terms.append(T.sum(T.square(T.sub(x, model.decode_x(z))), axis=1))
        terms.append(T.sum(T.square(T.sub(y, model.decode_y(z))), axis=1))
    total = terms[0]
    for t in terms[1:]:
        total = T.add(total, t)
    return T.mean(total)


# ------------------------------------------------------------------- Bi-VCCA


def kl_diag_gaussian(mu, logvar) -> Tensor:
    """KL(N(mu, diag exp(logvar)) || N(0, I)), summed over dims, averaged over rows."""
    mu, logvar = T.tensor(mu), T.tensor(logvar)
    if mu.shape != logvar.shape:
        raise ShapeError(f"mu shape {mu.shape} != logvar shape {logvar.shape}")
    inner = T.sub(T.add(logvar, 1.0), T.add(T.exp(logvar), T.square(mu)))
    if inner.ndim == 2:
        return T.mul(-0.5, T.mean(T.sum(inner, axis=1)))
    return T.mul(-0.5, T.sum(inner))


@dataclass
class BivccaModel(_TwoViewModel):
    enc_x: Mlp
    enc_y: Mlp
    dec_x: Mlp
    dec_y: Mlp
    d: int
    lam: float = 0.5
    n_samples: int = 1
    likelihood: str = "gaussian"
    kind = "bivcca"
    subnetworks = ("enc_x", "enc_y", "dec_x", "dec_y")

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.n_samples < 1:
            raise ValueError(f"sample count must be >= 1, got {self.n_samples}")

    @classmethod
    def build(cls, d_x, d_y, d, enc: MlpSpec, dec: MlpSpec, rng, lam=0.5, n_samples=1, likelihood="gaussian"):
        return cls(
            Mlp.build(d_x, 2 * d, enc, rng),
            Mlp.build(d_y, 2 * d, enc, rng),
            Mlp.build(d, d_x, dec, rng),
            Mlp.build(d, d_y, dec, rng),
            d,
            lam,
            n_samples,
            likelihood,
        )

    def gaussian_head(self, net: Mlp, v) -> tuple[Tensor, Tensor]:
        h = net(v)
        return T.slice_cols(h, 0, self.d), T.slice_cols(h, self.d, 2 * self.d)

    def encode_x(self, x) -> Tensor:
        """Posterior mean of q(z|x)."""
        return self.gaussian_head(self.enc_x, x)[0]

    def encode_y(self, y) -> Tensor:
        return self.gaussian_head(self.enc_y, y)[0]

    def draw_noise(self, n: int, seed) -> np.ndarray:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        return rng.standard_normal((self.n_samples, n, self.d))


def _vcca_branch(model: BivccaModel, mu, logvar, eps, x, y) -> Tensor:
    std = T.exp(T.mul(0.5, logvar))
    recon = None
    for e in eps:
        z = T.add(mu, T.mul(std, e))
        r = T.add(recon_nll(model.dec_x(z), x, model.likelihood), recon_nll(model.dec_y(z), y, model.likelihood))
        recon = r if recon is None else T.add(recon, r)
    recon = T.mul(1.0 / len(eps), recon)
    return T.add(recon, kl_diag_gaussian(mu, logvar))


def bivcca_loss(model: BivccaModel, x, y, seed=None, eps=None) -> Tensor:
    """lam * [recon from z_x + KL_x] + (1 - lam) * [recon from z_y + KL_y].

    Both branches share one reparameterisation noise draw of shape
    (n_samples, batch, d); pass ``eps`` to freeze it, else it is drawn from ``seed``.
    """
    _check_paired(x, y)
    if eps is None:
        eps = model.draw_noise(np.shape(x)[0], seed)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.ndim == 2:
        eps = eps[None]
    total = None
    for weight, net, view in ((model.lam, model.enc_x, x), (1.0 - model.lam, model.enc_y, y)):
        if weight == 0.0:
            continue
        mu, logvar = model.gaussian_head(net, view)
        term = T.mul(weight, _vcca_branch(model, mu, logvar, eps, x, y))
        total = term if total is None else T.add(total, term)
    return total


def vcca_loss(model: BivccaModel, x, y, seed=None, eps=None) -> Tensor:
    """Single-view variational objective driven by q(z|x) only."""
    _check_paired(x, y)
    if eps is None:
        eps = model.draw_noise(np.shape(x)[0], seed)
    eps = np.asarray(eps, dtype=np.float64)
    if eps.ndim == 2:
        eps = eps[None]
    mu, logvar = model.gaussian_head(model.enc_x, x)
    return _vcca_branch(model, mu, logvar, eps, x, y)


# ---------------------------------------------------------------------- ACCA


@dataclass
class AccaModel(_TwoViewModel):
    enc_x: Mlp
    enc_y: Mlp
    enc_xy: Mlp | None
    dec_x: Mlp
    dec_y: Mlp
    disc: Mlp
    prior: PriorSpec
    likelihood: str = "gaussian"
    gan: str = "standard"
    recon_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    subnetworks = ("enc_x", "enc_y", "enc_xy", "dec_x", "dec_y", "disc")

    def __post_init__(self):
        d = self.prior.dim
        for name in ("enc_x", "enc_y", "enc_xy"):
            net = getattr(self, name)
            if net is not None and net.out_dim != d:
                raise ShapeError(f"{name} outputs {net.out_dim} dims but prior has {d}")
        if self.enc_xy is not None and self.enc_xy.in_dim != self.enc_x.in_dim + self.enc_y.in_dim:
            raise ShapeError("joint encoder input width must equal d_x + d_y")
        if self.likelihood not in LIKELIHOODS:
            raise ValueError(f"unknown likelihood {self.likelihood!r}")
        if self.gan not in GAN_KINDS:
            raise ValueError(f"unknown gan kind {self.gan!r}")

    @property
    def kind(self) -> str:
        return "acca" if self.enc_xy is not None else "acca_nocv"

    @property
    def d(self) -> int:
        return self.prior.dim

    @classmethod
    def build(
        cls, d_x, d_y, prior: PriorSpec, enc: MlpSpec, dec: MlpSpec, disc: MlpSpec, rng,
        joint: bool = True, likelihood="gaussian", gan="standard", recon_weights=(1.0, 1.0, 1.0),
    ):
        d = prior.dim
        return cls(
            Mlp.build(d_x, d, enc, rng),
            Mlp.build(d_y, d, enc, rng),
            Mlp.build(d_x + d_y, d, enc, rng) if joint else None,
            Mlp.build(d, d_x, dec, rng),
            Mlp.build(d, d_y, dec, rng),
            Mlp.build(d, 1, disc, rng),
            prior,
            likelihood,
            gan,
            tuple(recon_weights),
        )

    def encode_x(self, x) -> Tensor:
        return self.enc_x(x)

    def encode_y(self, y) -> Tensor:
        return self.enc_y(y)

    def encode_xy(self, x, y) -> Tensor:
        if self.enc_xy is None:
            raise ValueError("model has no joint encoder")
        return self.enc_xy(T.concat([T.tensor(x), T.tensor(y)], axis=1))

    def encodings(self, x, y) -> list[tuple[str, Tensor]]:
        out = []
        if self.enc_xy is not None:
            out.append(("xy", self.encode_xy(x, y)))
        out.append(("x", self.encode_x(x)))
        out.append(("y", self.encode_y(y)))
        return out

    def discriminate(self, z) -> Tensor:
        """Probability that ``z`` was drawn from the prior."""
        return T.sigmoid(self.disc(z))

    @property
    def encoder_names(self) -> tuple[str, ...]:
        return ("enc_x", "enc_y", "enc_xy") if self.enc_xy is not None else ("enc_x", "enc_y")


def acca_reconstruction_loss(model: AccaModel, x, y) -> Tensor:
    """Reconstruct both views from each of z_xy, z_x and z_y (weighted sum)."""
    _check_paired(x, y)
    weights = dict(zip(("xy", "x", "y"), model.recon_weights))
    total = None
    for tag, z in model.encodings(x, y):
        w = weights[tag]
        if w == 0.0:
            continue
        term = T.add(
            recon_nll(model.dec_x(z), x, model.likelihood),
            recon_nll(model.dec_y(z), y, model.likelihood),
        )
        term = T.mul(w, term)
        total = term if total is None else T.add(total, term)
    return total


def _fake_scores(model: AccaModel, x, y, encodings=None) -> list[Tensor]:
    encodings = model.encodings(x, y) if encodings is None else encodings
    return [model.disc(z) for _, z in encodings]


def r_gan(model: AccaModel, x, y, prior_samples) -> Tensor:
    """E log D(z_prior) + sum over encoders of E log(1 - D(z_*))."""
    _check_paired(x, y)
    prior_samples = np.asarray(prior_samples, dtype=np.float64)
    if prior_samples.shape[0] != np.shape(x)[0]:
        raise ShapeError(f"prior batch has {prior_samples.shape[0]} rows but data batch has {np.shape(x)[0]}")
    total = T.mean(T.log_sigmoid(model.disc(prior_samples)))
    for s in _fake_scores(model, x, y):
        total = T.add(total, T.mean(T.log_sigmoid(T.neg(s))))
    return total


def acca_discriminator_loss(model: AccaModel, x, y, prior_samples, encodings=None) -> Tensor:
    """Loss minimised by the shared discriminator.

    Standard GAN: the negated adversarial value. lsgan: least-squares targets
    1 on prior samples and 0 on encodings, applied to the raw scores.
    """
    _check_paired(x, y)
    prior_samples = np.asarray(prior_samples, dtype=np.float64)
    if prior_samples.shape[0] != np.shape(x)[0]:
        raise ShapeError(f"prior batch has {prior_samples.shape[0]} rows but data batch has {np.shape(x)[0]}")
    real = model.disc(prior_samples)
    fakes = _fake_scores(model, x, y, encodings)
    if model.gan == "lsgan":
        total = T.mean(T.square(T.sub(real, 1.0)))
        for s in fakes:
            total = T.add(total, T.mean(T.square(s)))
        return total
    total = T.mean(T.softplus(T.neg(real)))      # -log D(prior)
    for s in fakes:
        total = T.add(total, T.mean(T.softplus(s)))  # -log(1 - D(fake))
    return total


def acca_encoder_adversarial_loss(model: AccaModel, x, y) -> Tensor:
    """Non-saturating generator loss summed over the encoders."""
    _check_paired(x, y)
    total = None
    for s in _fake_scores(model, x, y):
        if model.gan == "lsgan":
            term = T.mean(T.square(T.sub(s, 1.0)))
        else:
            term = T.mean(T.softplus(T.neg(s)))      # -log D(fake)
        total = term if total is None else T.add(total, term)
    return total


def model_manifest(model) -> dict[str, str]:
    """Architecture description stored next to checkpoints."""
    meta = {"model_kind": model.kind, "likelihood": model.likelihood}
    for name in model.subnetworks:
        net = getattr(model, name)
        if net is None:
            continue
        s = net.spec
        meta[f"mlp.{name}"] = (
            f"in={net.in_dim},out={net.out_dim},hidden={'/'.join(map(str, s.hidden))},"
            f"act={s.activation},output={s.output},slope={s.slope:g}"
        )
    if isinstance(model, AccaModel):
        meta["prior"] = model.prior.describe()
        meta["gan_kind"] = model.gan
        meta["recon_weights"] = ",".join(f"{w:g}" for w in model.recon_weights)
    if isinstance(model, BivccaModel):
        meta["lambda"] = f"{model.lam:g}"
        meta["n_samples"] = str(model.n_samples)
    return meta
