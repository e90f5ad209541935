"""Parameter checkpoints: raw little-endian float64 blob plus a text manifest.

Manifest layout, one parameter per line after optional ``# key: value``
header lines::

    <name> <d0>x<d1>... <byte offset>
"""
from __future__ import annotations

import os
from typing import Mapping

import numpy as np

from .tensor import Tensor


class CheckpointError(ValueError):
    pass


def _paths(prefix: str | os.PathLike) -> tuple[str, str]:
    prefix = os.fspath(prefix)
    return prefix + ".bin", prefix + ".manifest"


def save_checkpoint(
    prefix: str | os.PathLike,
    params: Mapping[str, Tensor | np.ndarray],
    meta: Mapping[str, str] | None = None,
) -> tuple[str, str]:
    bin_path, man_path = _paths(prefix)
    lines = [f"# {k}: {v}" for k, v in (meta or {}).items()]
    offset = 0
    with open(bin_path, "wb") as fh:
        for name in params:
            if any(c.isspace() for c in name):
                raise CheckpointError(f"parameter name {name!r} contains whitespace")
            arr = np.asarray(getattr(params[name], "data", params[name]), dtype="<f8")
            raw = np.ascontiguousarray(arr).tobytes()
            fh.write(raw)
            shape = "x".join(str(s) for s in arr.shape) or "scalar"
            lines.append(f"{name} {shape} {offset}")
            offset += len(raw)
    with open(man_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return bin_path, man_path


def read_manifest(prefix: str | os.PathLike) -> tuple[dict[str, str], list[tuple[str, tuple[int, ...], int]]]:
    _, man_path = _paths(prefix)
    meta: dict[str, str] = {}
    entries = []
    with open(man_path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(":")
                meta[key.strip()] = value.strip()
                continue
            parts = line.split()
            if len(parts) != 3:
                raise CheckpointError(f"{man_path}:{lineno}: malformed entry {line!r}")
            name, shape_s, off = parts
            shape = () if shape_s == "scalar" else tuple(int(s) for s in shape_s.split("x"))
            entries.append((name, shape, int(off)))
    return meta, entries


def load_checkpoint(prefix: str | os.PathLike) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    bin_path, _ = _paths(prefix)
    meta, entries = read_manifest(prefix)
    with open(bin_path, "rb") as fh:
        blob = fh.read()
    out = {}
    for name, shape, off in entries:
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        end = off + 8 * n
        if end > len(blob):
            raise CheckpointError(f"{bin_path}: parameter {name} needs bytes [{off}, {end}) but file has {len(blob)}")
        out[name] = np.frombuffer(blob, dtype="<f8", count=n, offset=off).reshape(shape).astype(np.float64)
    return out, meta


def assign(params: Mapping[str, Tensor], values: Mapping[str, np.ndarray]) -> None:
    """Copy loaded arrays into live parameters, checking names and shapes."""
    missing = set(params) - set(values)
    extra = set(values) - set(params)
    if missing or extra:
        raise CheckpointError(f"checkpoint mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
    for name, p in params.items():
        if values[name].shape != p.shape:
            raise CheckpointError(f"{name}: checkpoint shape {values[name].shape} != model shape {p.shape}")
        p.data[...] = values[name]
