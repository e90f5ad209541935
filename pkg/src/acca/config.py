"""Sectioned, typed experiment configuration.

Files use INI syntax (``[section]`` then ``key = value``). Each key has a
declared type; tuples are comma-separated. Serialising a parsed config and
parsing it again gives the same object.
"""
from __future__ import annotations

import configparser
import hashlib
import os
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .training import MODEL_KINDS, TrainConfig

DATASET_KINDS = ("toy", "mnist")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSection:
    kind: str = "toy"
    n_train: int = 8000
    n_test: int = 2000
    toy_seed: int = 0
    standardize: bool = True
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    axis: str = "left-right"
    subset: int = 10000
    mask_quadrants: tuple[int, ...] = (1,)
    mask_fill: float = 0.5
    mask_view: str = "x"


@dataclass(frozen=True)
class ModelSection:
    kind: str = "acca"
    enc_hidden: tuple[int, ...] = (256, 256)
    dec_hidden: tuple[int, ...] = (256, 256)
    disc_hidden: tuple[int, ...] = (256, 256)
    slope: float = 0.2
    prior: str = "gaussian"
    likelihood: str = "gaussian"
    gan: str = "standard"
    lam: float = 0.5
    d: int = 10
    n_samples: int = 1
    recon_weights: tuple[float, ...] = (1.0, 1.0, 1.0)


@dataclass(frozen=True)
class TrainSection:
    epochs: int = 100
    batch_size: int = 256
    lr: float = 1e-3
    seed: int = 0
    probe_every: int = 0
    probe_size: int = 500
    cmi_k: int = 3


@dataclass(frozen=True)
class EvalSection:
    metrics: tuple[str, ...] = ("nhsic", "mmd", "cmi", "misalignment")
    kernels: tuple[str, ...] = ("linear", "rbf")
    rbf_bandwidth: float = 0.0
    probe_size: int = 1000
    kmeans_k: int = 3


@dataclass(frozen=True)
class OutputSection:
    dir: str = ""


SECTIONS = {
    "dataset": DatasetSection,
    "model": ModelSection,
    "train": TrainSection,
    "eval": EvalSection,
    "output": OutputSection,
}

METRICS = ("nhsic", "mmd", "cmi", "misalignment", "kmeans", "probe")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSection = field(default_factory=DatasetSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)
    output: OutputSection = field(default_factory=OutputSection)

    def train_config(self) -> TrainConfig:
        m, t = self.model, self.train
        return TrainConfig(
            epochs=t.epochs, batch_size=t.batch_size, lr=t.lr, seed=t.seed, model_kind=m.kind,
            likelihood=m.likelihood, gan=m.gan, lam=m.lam, d=m.d, prior=m.prior,
            enc_hidden=m.enc_hidden, dec_hidden=m.dec_hidden, disc_hidden=m.disc_hidden,
            slope=m.slope, n_samples=m.n_samples, recon_weights=tuple(m.recon_weights),
            probe_every=t.probe_every, probe_size=t.probe_size, cmi_k=t.cmi_k,
        )

    def with_section(self, name: str, **changes) -> "ExperimentConfig":
        return replace(self, **{name: replace(getattr(self, name), **changes)})

    def to_text(self) -> str:
        return dumps(self)

    def hash(self) -> str:
        """Identity of the experiment; the output location does not take part."""
        text = dumps(replace(self, output=OutputSection()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


# ------------------------------------------------------------- (de)serialise


def _field_types(cls) -> dict[str, typing.Any]:
    return typing.get_type_hints(cls)


def _format(value) -> str:
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(section: str, key: str, raw: str, tp):
    origin = typing.get_origin(tp)
    try:
        if origin is tuple:
            inner = typing.get_args(tp)[0]
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            return tuple(_parse(section, key, p, inner) for p in parts)
        if tp is bool:
            low = raw.strip().lower()
            if low not in ("true", "false"):
                raise ValueError(raw)
            return low == "true"
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
        return raw.strip()
    except ValueError:
        name = getattr(tp, "__name__", str(tp))
        raise ConfigError(f"[{section}] {key}: cannot read {raw!r} as {name}") from None


def loads(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    unknown = set(cp.sections()) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    parts = {}
    for name, cls in SECTIONS.items():
        types = _field_types(cls)
        values = {}
        if cp.has_section(name):
            for key, raw in cp.items(name):
                if key not in types:
                    raise ConfigError(f"[{name}] unknown key {key!r}")
                values[key] = _parse(name, key, raw, types[key])
        parts[name] = cls(**values)
    cfg = ExperimentConfig(**parts)
    validate(cfg)
    return cfg


def dumps(cfg: ExperimentConfig) -> str:
    lines = []
    for name in SECTIONS:
        lines.append(f"[{name}]")
        sec = getattr(cfg, name)
        for f in fields(sec):
            lines.append(f"{f.name} = {_format(getattr(sec, f.name))}")
        lines.append("")
    return "\n".join(lines)


def load(path: str | os.PathLike, check_paths: bool = True) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    cfg = loads(path.read_text())
    if check_paths:
        check_dataset_paths(cfg)
    return cfg


def save(cfg: ExperimentConfig, path: str | os.PathLike) -> None:
    Path(path).write_text(dumps(cfg))


def validate(cfg: ExperimentConfig) -> None:
    ds, m, t, ev = cfg.dataset, cfg.model, cfg.train, cfg.eval
    if ds.kind not in DATASET_KINDS:
        raise ConfigError(f"[dataset] kind must be one of {DATASET_KINDS}, got {ds.kind!r}")
    if ds.axis not in ("left-right", "top-bottom"):
        raise ConfigError(f"[dataset] axis must be left-right or top-bottom, got {ds.axis!r}")
    if any(q not in (1, 2, 3, 4) for q in ds.mask_quadrants):
        raise ConfigError(f"[dataset] mask_quadrants must be drawn from 1..4, got {ds.mask_quadrants}")
    if ds.mask_view not in ("x", "y"):
        raise ConfigError(f"[dataset] mask_view must be x or y, got {ds.mask_view!r}")
    if m.kind not in MODEL_KINDS:
        raise ConfigError(f"[model] kind must be one of {MODEL_KINDS}, got {m.kind!r}")
    if len(m.recon_weights) != 3:
        raise ConfigError(f"[model] recon_weights needs 3 values, got {len(m.recon_weights)}")
    unknown = set(ev.metrics) - set(METRICS)
    if unknown:
        raise ConfigError(f"[eval] unknown metric(s): {', '.join(sorted(unknown))}")
    if set(ev.kernels) - {"linear", "rbf"}:
        raise ConfigError(f"[eval] kernels must be linear and/or rbf, got {ev.kernels}")
    if ev.rbf_bandwidth < 0:
        raise ConfigError("[eval] rbf_bandwidth must be >= 0 (0 selects the median heuristic)")
    try:
        cfg.train_config()
        from .models.prior import PriorSpec
        PriorSpec(m.prior, m.d)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def check_dataset_paths(cfg: ExperimentConfig) -> None:
    if cfg.dataset.kind != "mnist":
        return
    ds = cfg.dataset
    for key in ("train_images", "train_labels", "test_images", "test_labels"):
        value = getattr(ds, key)
        if not value:
            raise ConfigError(f"[dataset] {key} is required for mnist")
        if not Path(value).exists():
            raise ConfigError(f"[dataset] {key} path does not exist: {value}")


def toy_default() -> ExperimentConfig:
    return ExperimentConfig()


def mnist_default(**paths: str) -> ExperimentConfig:
    """Desk-scale halved-MNIST setup: 512/512 MLPs, d=30, 20 epochs, Bernoulli pixels."""
    return ExperimentConfig(
        dataset=DatasetSection(kind="mnist", standardize=False, **paths),
        model=ModelSection(
            enc_hidden=(512, 512), dec_hidden=(512, 512), disc_hidden=(512, 512),
            d=30, likelihood="bernoulli",
        ),
        train=TrainSection(epochs=20),
        eval=EvalSection(metrics=("nhsic", "misalignment", "kmeans", "probe")),
    )
