"""No-reference image denoising quality assessment.

Extracts quality features from (noisy, denoised) image pairs, predicts
PSNR/SSIM with a random-forest regressor, ranks competing denoising
results, and tunes a denoiser's parameter by gradient ascent on the
predicted quality.
"""

from .denoisers import THETA_BOUNDS, DenoiserId, denoise, grid_ids
from .features import FAMILIES, FEATURE_NAMES, extract_features
from .forest import ForestConfig, QualityModel, load_model, predict, rank_results, save_model, train
from .image import load_image, save_image, to_grayscale
from .metrics import kendall_tau, psnr, rmse_rse, ssim
from .noise import NoiseSpec, estimate_noise_sigma
from .tuner import TuneConfig, brute_force_optimum, gradient_ascent, tune

__version__ = "0.1.0"

__all__ = [
    "THETA_BOUNDS",
    "DenoiserId",
    "denoise",
    "grid_ids",
    "FAMILIES",
    "FEATURE_NAMES",
    "extract_features",
    "ForestConfig",
    "QualityModel",
    "load_model",
    "predict",
    "rank_results",
    "save_model",
    "train",
    "load_image",
    "save_image",
    "to_grayscale",
    "kendall_tau",
    "psnr",
    "rmse_rse",
    "ssim",
    "NoiseSpec",
    "estimate_noise_sigma",
    "TuneConfig",
    "brute_force_optimum",
    "gradient_ascent",
    "tune",
    "__version__",
]
