"""Command-line experiment runner.

Every command reads an experiment config, writes into a run directory and
leaves a ``<command>.meta.json`` there with the config hash, seed and version.
Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .checkpoint import CheckpointError
from .config import ConfigError, ExperimentConfig
from .datasets import DataError, ToyProjections, export_csv, write_sidecar
from .experiments import IMAGE_SIDE, evaluate, load_dataset, recover
from .metrics import MetricError, MetricReport
from .plot import bar_chart, line_chart, scatter
from .tensor import NonFiniteError
from .training import (
    CheckpointMismatch,
    DiagnosticTrace,
    Embeddings,
    TrainingError,
    build_model,
    embed,
    load_model_into,
    save_model,
    train,
)

OUTPUT_ENV = "ACCA_OUTPUT_ROOT"
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("acca")


def run_dir(cfg: ExperimentConfig, override: str | None = None) -> Path:
    """``--out`` beats the config's output dir, which beats $ACCA_OUTPUT_ROOT/<hash>."""
    if override:
        path = Path(override)
    elif cfg.output.dir:
        path = Path(cfg.output.dir)
    else:
        path = Path(os.environ.get(OUTPUT_ENV, "runs")) / cfg.hash()
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_meta(out: Path, command: str, cfg: ExperimentConfig | None, **extra) -> Path:
    meta = {
        "command": command,
        "config_hash": cfg.hash() if cfg is not None else None,
        "seed": cfg.train.seed if cfg is not None else None,
        "version": __version__,
        **extra,
    }
    path = out / f"{command}.meta.json"
    path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def _load_cfg(args) -> ExperimentConfig:
    return cfgmod.load(args.config)


def _checkpoint_prefix(args, out: Path) -> Path:
    return Path(args.checkpoint) if args.checkpoint else out / "model"


def _trained_model(cfg: ExperimentConfig, prefix: Path, train_ds):
    if not Path(f"{prefix}.manifest").exists():
        raise DataError(f"checkpoint not found: {prefix}.manifest")
    model = build_model(cfg.train_config(), train_ds.X.shape[1], train_ds.Y.shape[1])
    load_model_into(model, prefix)
    return model


# ------------------------------------------------------------------ commands


def cmd_gen_toy(args) -> int:
    cfg = _load_cfg(args)
    if cfg.dataset.kind != "toy":
        raise ConfigError("[dataset] kind must be toy for gen-toy")
    out = run_dir(cfg, args.out)
    train_ds, test_ds = load_dataset(cfg)
    export_csv(train_ds, out / "toy_train.csv")
    export_csv(test_ds, out / "toy_test.csv")
    ds = cfg.dataset
    write_sidecar(out / "toy.json", ds.toy_seed, ToyProjections.from_seed(ds.toy_seed),
                  n_train=ds.n_train, n_test=ds.n_test, standardized=ds.standardize)
    write_meta(out, "gen-toy", cfg)
    print(out)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    out = run_dir(cfg, args.out)
    cfgmod.save(cfg, out / "config.ini")
    train_ds, test_ds = load_dataset(cfg)
    tc = cfg.train_config()
    model = build_model(tc, train_ds.X.shape[1], train_ds.Y.shape[1])
    _, trace = train(model, train_ds, tc, probe_data=test_ds)
    save_model(model, out / "model", {"config_hash": cfg.hash(), "seed": str(tc.seed)})
    if len(trace):
        trace.to_csv(out / "trace.csv")
    write_meta(out, "train", cfg, optimizer=f"adam(lr={tc.lr:g},beta1=0.9,beta2=0.999,eps=1e-8)", steps=int(trace.column("step")[-1]) if len(trace) else None)
    print(out)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    out = run_dir(cfg, args.out)
    train_ds, test_ds = load_dataset(cfg)
    model = _trained_model(cfg, _checkpoint_prefix(args, out), train_ds)
    report = evaluate(model, test_ds, cfg, train_data=train_ds)
    report.to_json(out / "metrics.json")
    csv_path = out / "metrics.csv"
    if csv_path.exists():
        csv_path.unlink()
    report.append_csv(csv_path)
    write_meta(out, "eval", cfg)
    for k, v in report.values.items():
        print(f"{k}\t{v:.6f}")
    return EXIT_OK


def cmd_recover(args) -> int:
    cfg = _load_cfg(args)
    if cfg.dataset.kind != "mnist":
        raise ConfigError("[dataset] kind must be mnist for recover")
    out = run_dir(cfg, args.out)
    quads = tuple(int(q) for q in args.quadrants.split(",") if q) if args.quadrants is not None else cfg.dataset.mask_quadrants
    if any(q not in (1, 2, 3, 4) for q in quads):
        raise ConfigError(f"quadrants must be drawn from 1..4, got {quads}")
    train_ds, test_ds = load_dataset(cfg)
    model = _trained_model(cfg, _checkpoint_prefix(args, out), train_ds)
    ds = cfg.dataset
    images, acc = recover(model, test_ds, quads, ds.mask_view, ds.axis, ds.mask_fill, IMAGE_SIDE)
    tag = "".join(map(str, quads)) or "none"
    np.save(out / f"recovered_q{tag}.npy", images)
    result = {"quadrants": list(quads), "view": ds.mask_view, "pixel_accuracy": acc, "n": len(test_ds)}
    (out / f"recovery_q{tag}.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    write_meta(out, "recover", cfg, quadrants=list(quads))
    print(f"pixel_accuracy\t{acc:.6f}")
    return EXIT_OK


def cmd_embed(args) -> int:
    cfg = _load_cfg(args)
    out = run_dir(cfg, args.out)
    train_ds, test_ds = load_dataset(cfg)
    model = _trained_model(cfg, _checkpoint_prefix(args, out), train_ds)
    data = test_ds if args.split == "test" else train_ds
    paths = embed(model, data).to_csv(out / f"embed_{args.split}")
    if data.labels is not None:
        np.savetxt(out / f"embed_{args.split}_labels.csv", data.labels, fmt="%d", header="label", comments="")
    write_meta(out, "embed", cfg, split=args.split)
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_plot(args) -> int:
    out = Path(args.out) if args.out else Path(os.environ.get(OUTPUT_ENV, "runs"))
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if args.trace:
        if not Path(args.trace).exists():
            raise DataError(f"trace file not found: {args.trace}")
        tr = DiagnosticTrace.from_csv(args.trace)
        written.append(line_chart(
            tr.column("step"), {"mmd_sum": tr.column("mmd_sum"), "cmi": tr.column("cmi")},
            out / "trace.svg", title="probe diagnostics", ylabel="value",
        ))
    if args.report:
        if not Path(args.report).exists():
            raise DataError(f"report file not found: {args.report}")
        rep = MetricReport.from_json(args.report)
        written.append(bar_chart(rep.values, out / "report.svg", title=f"{rep.model} on {rep.dataset}"))
    if args.embeddings:
        emb = Embeddings.from_csv(args.embeddings)
        if emb.Z_x is None:
            raise DataError(f"no embeddings found at prefix {args.embeddings}")
        labels = None
        lab_path = Path(f"{args.embeddings}_labels.csv")
        if lab_path.exists():
            labels = np.loadtxt(lab_path, skiprows=1, dtype=np.int64, ndmin=1)
        written.append(scatter(emb.Z_x, out / "embed_x.svg", labels, title="view x embedding"))
        written.append(scatter(emb.Z_y, out / "embed_y.svg", labels, title="view y embedding"))
    if not written:
        raise ConfigError("plot needs --trace, --report or --embeddings")
    write_meta(out, "plot", None, inputs=[a for a in (args.trace, args.report, args.embeddings) if a])
    for p in written:
        print(p)
    return EXIT_OK


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acca", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(name, fn, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="experiment config (INI)")
        sp.add_argument("--out", help=f"run directory (default: config output dir or ${OUTPUT_ENV}/<hash>)")
        sp.set_defaults(func=fn)
        return sp

    with_config("gen-toy", cmd_gen_toy, "write the toy dataset as CSV plus a JSON sidecar")
    with_config("train", cmd_train, "train the configured model; writes checkpoint and trace")
    for name, fn, text in (
        ("eval", cmd_eval, "score test embeddings; writes metrics.json and metrics.csv"),
        ("recover", cmd_recover, "regenerate images from quadrant-masked half views"),
        ("embed", cmd_embed, "export embeddings as CSV"),
    ):
        sp = with_config(name, fn, text)
        sp.add_argument("--checkpoint", help="checkpoint prefix (default: <run dir>/model)")
        if name == "recover":
            sp.add_argument("--quadrants", help="comma-separated quadrants 1-4 (default from config)")
        if name == "embed":
            sp.add_argument("--split", choices=("train", "test"), default="test")

    sp = sub.add_parser("plot", help="emit SVG charts from a trace, report or embeddings")
    sp.add_argument("--trace")
    sp.add_argument("--report")
    sp.add_argument("--embeddings", help="prefix given to embed (files <prefix>_x.csv ...)")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, CheckpointMismatch) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, CheckpointError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingError, NonFiniteError, MetricError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
