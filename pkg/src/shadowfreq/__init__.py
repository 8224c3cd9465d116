"""Frequency-aware shadow-removal primitives: Haar and Fourier decompositions,
shadow losses, invariant chromaticity, soft masks, the wavelet attention
downsampling module and region-wise evaluation."""

__version__ = "0.1.0"

from .imagecore import ColorSpace, Image, ImageIOError, load_image, save_image, rgb_to_lab, lab_to_rgb
from .wavelet import Subbands, haar_dwt2, haar_idwt2, subband_similarity
from .spectrum import dft2, idft2, spectral_weight
from .chromaticity import (ChromaticityMap, DegenerateInputError, illumination_compensate,
                           minimize_entropy, pca_project, shadowfree_chromaticity)
from .mask import RegionStats, SoftMask, adjust_region, compute_soft_mask, region_stats
from .losses import (LossReport, loss_align, loss_brightness_ch, loss_ff, loss_frequency,
                     loss_recon, loss_vd, overall_loss)
from .wadm import WadmParams, init_wadm_params, wadm_forward
from .metrics import RegionMetrics, evaluate_dataset, evaluate_pair, mask_from_threshold

__all__ = [
    "ColorSpace", "Image", "ImageIOError", "load_image", "save_image", "rgb_to_lab", "lab_to_rgb",
    "Subbands", "haar_dwt2", "haar_idwt2", "subband_similarity",
    "dft2", "idft2", "spectral_weight",
    "ChromaticityMap", "DegenerateInputError", "illumination_compensate", "minimize_entropy",
    "pca_project", "shadowfree_chromaticity",
    "RegionStats", "SoftMask", "adjust_region", "compute_soft_mask", "region_stats",
    "LossReport", "loss_align", "loss_brightness_ch", "loss_ff", "loss_frequency", "loss_recon",
    "loss_vd", "overall_loss",
    "WadmParams", "init_wadm_params", "wadm_forward",
    "RegionMetrics", "evaluate_dataset", "evaluate_pair", "mask_from_threshold",
]
