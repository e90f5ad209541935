from .alignment import misalignment_degree, pair_angles
from .downstream import KMeansResult, cluster_purity, kmeans, linear_probe
from .image import pixel_accuracy, psnr, sharpness, ssim
from .information import cmi_ksg, mi_ksg
from .kernels import KernelSpec, MetricError, hsic, median_bandwidth, mmd2, nhsic
from .report import MetricReport

__all__ = [
    "KMeansResult",
    "KernelSpec",
    "MetricError",
    "MetricReport",
    "cluster_purity",
    "cmi_ksg",
    "hsic",
    "kmeans",
    "linear_probe",
    "median_bandwidth",
    "mi_ksg",
    "misalignment_degree",
    "mmd2",
    "nhsic",
    "pair_angles",
    "pixel_accuracy",
    "psnr",
    "sharpness",
    "ssim",
]
