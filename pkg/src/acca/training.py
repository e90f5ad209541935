"""Deterministic minibatch training for the neural multi-view models."""
from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import tensor as T
from .checkpoint import assign, load_checkpoint, save_checkpoint
from .datasets import TOY_MIXTURE, GmmSpec, MultiViewDataset
from .metrics.information import cmi_ksg
from .metrics.kernels import median_bandwidth, mmd2
from .models.deep import (
    AccaModel,
    BivccaModel,
    MvaeModel,
    acca_discriminator_loss,
    acca_encoder_adversarial_loss,
    acca_reconstruction_loss,
    bivcca_loss,
    model_manifest,
    mvae_loss,
)
from .models.prior import PriorSpec
from .nn import MlpSpec
from .optim import Adam
from .tensor import NonFiniteError

log = logging.getLogger(__name__)

MODEL_KINDS = ("acca", "acca_nocv", "bivcca", "mvae")


class TrainingError(RuntimeError):
    pass


class CheckpointMismatch(TrainingError):
    """Checkpoint manifest disagrees with the model it is loaded into."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 256
    lr: float = 1e-3
    seed: int = 0
    model_kind: str = "acca"
    likelihood: str = "gaussian"
    gan: str = "standard"
    lam: float = 0.5
    d: int = 10
    prior: str = "gaussian"
    enc_hidden: tuple[int, ...] = (256, 256)
    dec_hidden: tuple[int, ...] = (256, 256)
    disc_hidden: tuple[int, ...] = (256, 256)
    slope: float = 0.2
    n_samples: int = 1
    recon_weights: tuple[float, float, float] = (1.0, 1.0, 1.0)
    probe_every: int = 0
    probe_size: int = 500
    cmi_k: int = 3

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.model_kind!r}")
        for name in ("enc_hidden", "dec_hidden", "disc_hidden", "recon_weights"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def prior_spec(self, gmm: GmmSpec = TOY_MIXTURE) -> PriorSpec:
        return PriorSpec(self.prior, self.d, gmm if self.prior == "gmm" else None)

    def with_(self, **changes) -> "TrainConfig":
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


class _Streams:
    """Independent generators derived from the run seed."""

    def __init__(self, seed: int):
        init, shuffle, prior, noise, probe = np.random.SeedSequence(seed).spawn(5)
        self.init = np.random.default_rng(init)
        self.shuffle = np.random.default_rng(shuffle)
        self.prior = np.random.default_rng(prior)
        self.noise = np.random.default_rng(noise)
        self.probe = np.random.default_rng(probe)


def build_model(cfg: TrainConfig, d_x: int, d_y: int, rng: np.random.Generator | None = None):
    rng = _Streams(cfg.seed).init if rng is None else rng
    output = "identity"
    enc = MlpSpec(cfg.enc_hidden, "leaky_relu", "identity", cfg.slope)
    dec = MlpSpec(cfg.dec_hidden, "leaky_relu", output, cfg.slope)
    if cfg.model_kind in ("acca", "acca_nocv"):
        disc = MlpSpec(cfg.disc_hidden, "leaky_relu", "identity", cfg.slope)
        return AccaModel.build(
            d_x, d_y, cfg.prior_spec(), enc, dec, disc, rng,
            joint=cfg.model_kind == "acca", likelihood=cfg.likelihood, gan=cfg.gan,
            recon_weights=cfg.recon_weights,
        )
    if cfg.model_kind == "bivcca":
        return BivccaModel.build(d_x, d_y, cfg.d, enc, dec, rng, cfg.lam, cfg.n_samples, cfg.likelihood)
    return MvaeModel.build(d_x, d_y, cfg.d, enc, dec, rng, cfg.likelihood)


# ------------------------------------------------------------------ tracing


TRACE_COLUMNS = ("step", "mmd_sum", "cmi", "loss_recon", "loss_disc", "loss_enc_adv")


@dataclass
class DiagnosticTrace:
    records: list[dict] = field(default_factory=list)

    def add(self, **rec) -> None:
        if self.records and rec["step"] <= self.records[-1]["step"]:
            raise ValueError("trace steps must strictly increase")
        self.records.append({k: rec.get(k, float("nan")) for k in TRACE_COLUMNS})

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.records], dtype=np.float64)

    def to_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(TRACE_COLUMNS)
            for r in self.records:
                wr.writerow([r["step"], *[repr(float(r[k])) for k in TRACE_COLUMNS[1:]]])

    @classmethod
    def from_csv(cls, path: str | os.PathLike) -> "DiagnosticTrace":
        tr = cls()
        with open(path, newline="") as fh:
            rd = csv.DictReader(fh)
            for row in rd:
                tr.add(step=int(row["step"]), **{k: float(row[k]) for k in TRACE_COLUMNS[1:]})
        return tr


@dataclass
class _Probe:
    x: np.ndarray
    y: np.ndarray
    prior: np.ndarray
    bandwidth: float
    eps: np.ndarray | None = None


def _make_probe(model, data: MultiViewDataset, cfg: TrainConfig, streams: _Streams) -> _Probe:
    n = min(cfg.probe_size, len(data))
    idx = np.sort(streams.probe.permutation(len(data))[:n])
    prior = model_prior(model).sample(n, streams.probe)
    eps = model.draw_noise(n, streams.probe) if isinstance(model, BivccaModel) else None
    return _Probe(data.X[idx], data.Y[idx], prior, median_bandwidth(prior), eps)


def _probe_losses(model, probe: _Probe) -> dict[str, float]:
    with T.no_grad():
        if isinstance(model, AccaModel):
            return {
                "loss_recon": acca_reconstruction_loss(model, probe.x, probe.y).item(),
                "loss_disc": acca_discriminator_loss(model, probe.x, probe.y, probe.prior).item(),
                "loss_enc_adv": acca_encoder_adversarial_loss(model, probe.x, probe.y).item(),
            }
        if isinstance(model, BivccaModel):
            return {"loss_recon": bivcca_loss(model, probe.x, probe.y, eps=probe.eps).item()}
        return {"loss_recon": mvae_loss(model, probe.x, probe.y).item()}


def probe_diagnostics(model, probe: _Probe, cmi_k: int = 3) -> dict[str, float]:
    """MMD^2 of every encoding against the prior (summed) and I(X; Y | Z)."""
    emb = embed(model, probe.x, probe.y)
    mmd_sum = sum(mmd2(z, probe.prior, probe.bandwidth) for z in emb.all())
    z_cond = emb.Z_xy if emb.Z_xy is not None else emb.Z_x
    cmi = cmi_ksg(probe.x, probe.y, z_cond, k=cmi_k)
    return {"mmd_sum": float(mmd_sum), "cmi": cmi, **_probe_losses(model, probe)}


# ------------------------------------------------------------ training loops


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _grads(loss, params):
    return T.backward(loss, params)


def _guard(step: int, what: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except NonFiniteError as exc:
        raise TrainingError(f"non-finite {what} at step {step}: {exc}") from exc


def _run(model, data: MultiViewDataset, cfg: TrainConfig, update, probe_data=None) -> DiagnosticTrace:
    streams = _Streams(cfg.seed)
    trace = DiagnosticTrace()
    probe = None
    if cfg.probe_every > 0:
        probe = _make_probe(model, probe_data if probe_data is not None else data, cfg, streams)
        trace.add(step=0, **_guard(0, "diagnostic", probe_diagnostics, model, probe, cfg.cmi_k))
    step = 0
    for epoch in range(cfg.epochs):
        for idx in _batches(len(data), cfg.batch_size, streams.shuffle):
            step += 1
            _guard(step, "loss", update, data.X[idx], data.Y[idx], streams)
            if probe is not None and step % cfg.probe_every == 0:
                trace.add(step=step, **_guard(step, "diagnostic", probe_diagnostics, model, probe, cfg.cmi_k))
        log.debug("epoch %d done (step %d)", epoch + 1, step)
    if probe is not None and (not trace.records or trace.records[-1]["step"] != step):
        trace.add(step=step, **_guard(step, "diagnostic", probe_diagnostics, model, probe, cfg.cmi_k))
    return trace


class AccaTrainer:
    """Alternates a reconstruction phase with a regularisation phase per minibatch.

    Phase 1 updates encoders and decoders on the reconstruction loss. Phase 2
    first updates the discriminator, then the encoders on the adversarial loss.
    Each phase owns its own Adam state.
    """

    def __init__(self, model: AccaModel, cfg: TrainConfig):
        self.model = model
        enc = model.parameters_of(*model.encoder_names)
        self.recon_params = enc + model.parameters_of("dec_x", "dec_y")
        self.disc_params = model.parameters_of("disc")
        self.enc_params = enc
        self.opt_recon = Adam(self.recon_params, lr=cfg.lr)
        self.opt_disc = Adam(self.disc_params, lr=cfg.lr)
        self.opt_enc = Adam(self.enc_params, lr=cfg.lr)

    def reconstruction_phase(self, x, y) -> float:
        loss = acca_reconstruction_loss(self.model, x, y)
        self.opt_recon.step(_grads(loss, self.recon_params))
        return loss.item()

    def discriminator_step(self, x, y, prior_samples) -> float:
        with T.no_grad():
            codes = self.model.encodings(x, y)
        loss = acca_discriminator_loss(self.model, x, y, prior_samples, encodings=codes)
        self.opt_disc.step(_grads(loss, self.disc_params))
        return loss.item()

    def encoder_step(self, x, y) -> float:
        loss = acca_encoder_adversarial_loss(self.model, x, y)
        self.opt_enc.step(_grads(loss, self.enc_params))
        return loss.item()

    def regularization_phase(self, x, y, prior_samples) -> tuple[float, float]:
        return self.discriminator_step(x, y, prior_samples), self.encoder_step(x, y)

    def step(self, x, y, streams: _Streams) -> None:
        self.reconstruction_phase(x, y)
        self.regularization_phase(x, y, self.model.prior.sample(x.shape[0], streams.prior))


def train_acca(model: AccaModel, data: MultiViewDataset, cfg: TrainConfig, probe_data=None):
    if cfg.model_kind not in ("acca", "acca_nocv"):
        raise ValueError(f"train_acca needs model kind acca or acca_nocv, got {cfg.model_kind}")
    trainer = AccaTrainer(model, cfg)
    trace = _run(model, data, cfg, trainer.step, probe_data)
    return model, trace


def train_bivcca(model: BivccaModel, data: MultiViewDataset, cfg: TrainConfig, probe_data=None):
    params = list(model.named_parameters().values())
    opt = Adam(params, lr=cfg.lr)

    def update(x, y, streams):
        loss = bivcca_loss(model, x, y, seed=streams.noise)
        opt.step(_grads(loss, params))

    trace = _run(model, data, cfg, update, probe_data)
    return model, trace


def train_mvae(model: MvaeModel, data: MultiViewDataset, cfg: TrainConfig, probe_data=None):
    params = list(model.named_parameters().values())
    opt = Adam(params, lr=cfg.lr)

    def update(x, y, streams):
        opt.step(_grads(mvae_loss(model, x, y), params))

    trace = _run(model, data, cfg, update, probe_data)
    return model, trace


def train(model, data: MultiViewDataset, cfg: TrainConfig, probe_data=None):
    """Dispatch on the model type."""
    if isinstance(model, AccaModel):
        return train_acca(model, data, cfg, probe_data)
    if isinstance(model, BivccaModel):
        return train_bivcca(model, data, cfg, probe_data)
    if isinstance(model, MvaeModel):
        return train_mvae(model, data, cfg, probe_data)
    raise TypeError(f"cannot train {type(model).__name__}")


# ------------------------------------------------------------ inference utils


@dataclass
class Embeddings:
    Z_x: np.ndarray
    Z_y: np.ndarray
    Z_xy: np.ndarray | None = None

    def all(self) -> list[np.ndarray]:
        return [z for z in (self.Z_xy, self.Z_x, self.Z_y) if z is not None]

    def to_csv(self, prefix: str | os.PathLike) -> list[str]:
        paths = []
        for tag, z in (("x", self.Z_x), ("y", self.Z_y), ("xy", self.Z_xy)):
            if z is None:
                continue
            path = f"{os.fspath(prefix)}_{tag}.csv"
            with open(path, "w", newline="") as fh:
                wr = csv.writer(fh, lineterminator="\n")
                wr.writerow(["row_index", *[f"z{j}" for j in range(z.shape[1])]])
                for i, row in enumerate(z):
                    wr.writerow([i, *[repr(float(v)) for v in row]])
            paths.append(path)
        return paths

    @classmethod
    def from_csv(cls, prefix: str | os.PathLike) -> "Embeddings":
        def read(tag):
            path = f"{os.fspath(prefix)}_{tag}.csv"
            if not os.path.exists(path):
                return None
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))[1:]
            return np.array([[float(v) for v in r[1:]] for r in rows])

        return cls(read("x"), read("y"), read("xy"))


def _batched(fn, *arrays, batch: int = 2048) -> np.ndarray:
    n = arrays[0].shape[0]
    out = []
    with T.no_grad():
        for s in range(0, n, batch):
            out.append(fn(*(a[s:s + batch] for a in arrays)).data)
    return np.vstack(out) if out else np.zeros((0, 0))


def embed(model, X, Y=None) -> Embeddings:
    """Encodings of paired views; Bi-VCCA contributes posterior means."""
    if isinstance(X, MultiViewDataset):
        X, Y = X.X, X.Y
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    zx = _batched(model.encode_x, X)
    zy = _batched(model.encode_y, Y)
    zxy = None
    if isinstance(model, AccaModel) and model.enc_xy is not None:
        zxy = _batched(model.encode_xy, X, Y)
    return Embeddings(zx, zy, zxy)


def model_prior(model) -> PriorSpec:
    return model.prior if isinstance(model, AccaModel) else PriorSpec("gaussian", model.d)


def cross_generate(model, from_view: str, inputs) -> np.ndarray:
    """Decode the opposite view from the encoding of ``from_view`` ("x" or "y")."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if from_view == "x":
        enc, dec = model.encode_x, model.decode_y
    elif from_view == "y":
        enc, dec = model.encode_y, model.decode_x
    else:
        raise ValueError(f"from_view must be 'x' or 'y', got {from_view!r}")
    expected = getattr(model, f"enc_{from_view}").in_dim
    if inputs.shape[1] != expected:
        raise T.ShapeError(f"view {from_view} has {expected} features but input has {inputs.shape[1]}")
    return _batched(lambda v: dec(enc(v)), inputs)


def reconstruct_both(model, from_view: str, inputs) -> tuple[np.ndarray, np.ndarray]:
    """Decode both views from one view's encoding."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    enc = model.encode_x if from_view == "x" else model.encode_y
    z = _batched(enc, inputs)
    return _batched(model.decode_x, z), _batched(model.decode_y, z)


def unconditional_generate(model, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    z = model_prior(model).sample(n, rng)
    return _batched(model.decode_x, z), _batched(model.decode_y, z)


# ------------------------------------------------------------- checkpoints


def save_model(model, prefix: str | os.PathLike, extra: dict | None = None) -> tuple[str, str]:
    meta = model_manifest(model)
    meta.update(extra or {})
    return save_checkpoint(prefix, model.named_parameters(), meta)


def load_model_into(model, prefix: str | os.PathLike) -> dict[str, str]:
    values, meta = load_checkpoint(prefix)
    expected = model_manifest(model)
    for key, val in expected.items():
        if key in meta and meta[key] != val:
            raise CheckpointMismatch(f"checkpoint field {key} is {meta[key]!r} but model has {val!r}")
    assign(model.named_parameters(), values)
    return meta
