"""Adversarial CCA and multi-view baselines on a small numpy autodiff engine."""

__version__ = "0.1.0"
