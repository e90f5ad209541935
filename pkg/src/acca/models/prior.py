from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..datasets import TOY_MIXTURE, GmmSpec, sample_gmm


@dataclass(frozen=True)
class PriorSpec:
    """Latent prior: ``"gaussian"`` (isotropic standard normal) or ``"gmm"``.

    The mixture is applied independently to every latent coordinate.
    """

    kind: str = "gaussian"
    dim: int = 10
    gmm: GmmSpec | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"prior dim must be >= 1, got {self.dim}")
        if self.kind not in ("gaussian", "gmm"):
            raise ValueError(f"unknown prior kind {self.kind!r}")
        if self.kind == "gmm" and self.gmm is None:
            object.__setattr__(self, "gmm", TOY_MIXTURE)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal((n, self.dim))
        return sample_gmm(self.gmm, n, self.dim, rng)

    def describe(self) -> str:
        if self.kind == "gaussian":
            return f"gaussian(dim={self.dim})"
        comps = ";".join(f"{w:g},{m:g},{s:g}" for w, m, s in self.gmm.components)
        return f"gmm(dim={self.dim},components={comps})"
