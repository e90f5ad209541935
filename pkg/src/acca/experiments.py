"""Dataset loading, evaluation and recovery routines shared by the CLI and tests."""
from __future__ import annotations

import itertools

import numpy as np

from .config import ExperimentConfig
from .datasets import (
    DataError,
    MultiViewDataset,
    Standardizer,
    half_shape,
    halve_views,
    load_idx,
    make_toy,
    mask_quadrants,
    reassemble,
)
from .metrics import (
    KernelSpec,
    MetricReport,
    cluster_purity,
    cmi_ksg,
    kmeans,
    linear_probe,
    median_bandwidth,
    misalignment_degree,
    mmd2,
    nhsic,
    pixel_accuracy,
)
from .training import embed, model_prior, reconstruct_both

IMAGE_SIDE = 28


def load_dataset(cfg: ExperimentConfig) -> tuple[MultiViewDataset, MultiViewDataset]:
    """Train and test splits; toy views are standardised with train statistics when enabled."""
    ds = cfg.dataset
    if ds.kind == "toy":
        train, test = make_toy(ds.n_train, ds.n_test, seed=ds.toy_seed)
        if ds.standardize:
            st = Standardizer.fit(train)
            train, test = st.transform(train), st.transform(test)
        return train, test
    train_img, train_lab = load_idx(ds.train_images, ds.train_labels)
    test_img, test_lab = load_idx(ds.test_images, ds.test_labels)
    if ds.subset and ds.subset < len(train_img):
        train_img, train_lab = train_img[: ds.subset], train_lab[: ds.subset]
    if ds.n_test and ds.n_test < len(test_img):
        test_img, test_lab = test_img[: ds.n_test], test_lab[: ds.n_test]
    return (
        halve_views(train_img, ds.axis, train_lab, "train"),
        halve_views(test_img, ds.axis, test_lab, "test"),
    )


def _kernels(cfg: ExperimentConfig) -> list[KernelSpec]:
    bw = cfg.eval.rbf_bandwidth or None
    return [KernelSpec(k, bw if k == "rbf" else None) for k in cfg.eval.kernels]


def evaluate(model, data: MultiViewDataset, cfg: ExperimentConfig, train_data: MultiViewDataset | None = None) -> MetricReport:
    """Score test embeddings with the metrics listed in the eval section."""
    report = MetricReport({}, seed=cfg.train.seed, model=model.kind, dataset=cfg.dataset.kind)
    emb = embed(model, data)
    ev = cfg.eval
    n_probe = min(ev.probe_size, len(data))
    if "nhsic" in ev.metrics:
        for k in _kernels(cfg):
            report.add(f"nhsic_{k.kind}", nhsic(emb.Z_x, emb.Z_y, k))
    if "mmd" in ev.metrics:
        prior = model_prior(model).sample(n_probe, np.random.default_rng(cfg.train.seed))
        bw = median_bandwidth(prior)
        for tag, z in (("xy", emb.Z_xy), ("x", emb.Z_x), ("y", emb.Z_y)):
            if z is not None:
                report.add(f"mmd2_{tag}", mmd2(z[:n_probe], prior, bw))
    if "cmi" in ev.metrics:
        z = emb.Z_xy if emb.Z_xy is not None else emb.Z_x
        report.add("cmi", cmi_ksg(data.X[:n_probe], data.Y[:n_probe], z[:n_probe], k=cfg.train.cmi_k))
    if "misalignment" in ev.metrics:
        report.add("misalignment", misalignment_degree(emb.Z_x, emb.Z_y))
    labels = data.labels
    if "kmeans" in ev.metrics and labels is not None:
        res = kmeans(np.hstack([emb.Z_x, emb.Z_y]), ev.kmeans_k, seed=cfg.train.seed)
        report.add("kmeans_purity", cluster_purity(res.labels, labels))
    if "probe" in ev.metrics and labels is not None:
        if train_data is None or train_data.labels is None:
            raise DataError("linear probe needs a labelled training split")
        tr = embed(model, train_data)
        Z = np.vstack([np.hstack([tr.Z_x, tr.Z_y]), np.hstack([emb.Z_x, emb.Z_y])])
        y = np.concatenate([train_data.labels, labels])
        n = len(train_data)
        report.add("probe_accuracy", linear_probe(Z, y, (np.arange(n), np.arange(n, n + len(data))), seed=cfg.train.seed))
    return report


# ------------------------------------------------------------------ recovery


def recover(model, data: MultiViewDataset, quadrants, view: str = "x", axis: str = "left-right",
            fill: float = 0.5, side: int = IMAGE_SIDE) -> tuple[np.ndarray, float]:
    """Mask quadrants of one half-view, regenerate the full image from it.

    The masked half is encoded and both halves are decoded from that single
    code. Returns the reassembled images and their pixel accuracy against the
    unmasked originals.
    """
    h, w = half_shape(side, axis)
    source = data.X if view == "x" else data.Y
    masked = mask_quadrants(source, h, w, list(quadrants), fill)
    x_hat, y_hat = reconstruct_both(model, view, masked)
    images = reassemble(x_hat, y_hat, side, axis)
    truth = reassemble(data.X, data.Y, side, axis)
    return images, pixel_accuracy(images, truth)


def recovery_by_count(model, data: MultiViewDataset, view: str = "x", axis: str = "left-right",
                      fill: float = 0.5, counts=(1, 2, 3)) -> dict[int, float]:
    """Mean pixel accuracy over every quadrant subset of each size."""
    out = {}
    for k in counts:
        accs = [recover(model, data, q, view, axis, fill)[1] for q in itertools.combinations((1, 2, 3, 4), k)]
        out[k] = float(np.mean(accs))
    return out
