from .deep import (
    AccaModel,
    BivccaModel,
    MvaeModel,
    acca_discriminator_loss,
    acca_encoder_adversarial_loss,
    acca_reconstruction_loss,
    bivcca_loss,
    kl_diag_gaussian,
    model_manifest,
    mvae_loss,
    r_gan,
    recon_nll,
    vcca_loss,
)
from .linear import LinearCcaResult, PccaParams, SingularCovarianceError, linear_cca_fit, pcca_fit_em
from .prior import PriorSpec

__all__ = [
    "AccaModel",
    "BivccaModel",
    "MvaeModel",
    "LinearCcaResult",
    "PccaParams",
    "PriorSpec",
    "SingularCovarianceError",
    "acca_discriminator_loss",
    "acca_encoder_adversarial_loss",
    "acca_reconstruction_loss",
    "bivcca_loss",
    "kl_diag_gaussian",
    "linear_cca_fit",
    "model_manifest",
    "mvae_loss",
    "pcca_fit_em",
    "r_gan",
    "recon_nll",
    "vcca_loss",
]
