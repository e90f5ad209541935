from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

from .kernels import MetricError


@dataclass
class MetricReport:
    values: dict[str, float] = field(default_factory=dict)
    seed: int | None = None
    model: str = ""
    dataset: str = ""

    def add(self, name: str, value: float) -> None:
        value = float(value)
        if not math.isfinite(value):
            raise MetricError(f"metric {name} is not finite: {value}")
        self.values[name] = value

    def to_json(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            json.dump(
                {"values": self.values, "seed": self.seed, "model": self.model, "dataset": self.dataset},
                fh,
                indent=2,
                sort_keys=True,
            )
            fh.write("\n")

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "MetricReport":
        with open(path) as fh:
            raw = json.load(fh)
        return cls(dict(raw["values"]), raw.get("seed"), raw.get("model", ""), raw.get("dataset", ""))

    def append_csv(self, path: str | os.PathLike) -> None:
        """Append rows ``metric,value,dataset,model,seed``; header written on first use."""
        new = not os.path.exists(path) or os.path.getsize(path) == 0
        with open(path, "a", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            if new:
                wr.writerow(["metric", "value", "dataset", "model", "seed"])
            for name, value in self.values.items():
                wr.writerow([name, repr(value), self.dataset, self.model, self.seed])
