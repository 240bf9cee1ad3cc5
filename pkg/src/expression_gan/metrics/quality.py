"""
Image quality metrics.

PSNR and SSIM compare a generated face with its ground truth; the inception
score summarises how confidently and diversely a classifier labels a set of
generated faces; lpips_like is a learned perceptual distance computed on the
identity embedder's convolutional stages.
"""

import math
import logging
from typing import Callable, Optional, Sequence, Union

import numpy as np
import torch
from scipy.signal import correlate2d
from scipy.special import xlogy

from ..errors import EmbedderNotFrozenError
from ..identity import IdentityEmbedder
from ..utils.images import to_tensor

logger = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
PROBABILITY_TOLERANCE = 1e-5
FEATURE_EPS = 1e-10
NORM_FLOOR = 0.25

Classifier = Union[Callable[[np.ndarray], np.ndarray], object]


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 255.0) -> float:
    """
    Peak signal-to-noise ratio in dB.

    Args:
        a: Image (any shape).
        b: Image of the same shape.
        peak: Maximum pixel value (255 for 8-bit images).

    Returns:
        10 * log10(peak^2 / MSE), or math.inf for identical images.
    """
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak ** 2 / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalised 2-D Gaussian window."""
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    window = np.outer(g, g)
    return window / window.sum()


def _ssim_channel(a: np.ndarray, b: np.ndarray, window: np.ndarray, c1: float, c2: float) -> float:
    def filt(img: np.ndarray) -> np.ndarray:
        return correlate2d(img, window, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a ** 2
    var_b = filt(b * b) - mu_b ** 2
    cov = filt(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 255.0) -> float:
    """
    Structural similarity with an 11x11 Gaussian window (sigma 1.5).

    Computed in float64 over valid window positions only and averaged over
    windows and channels.

    Args:
        a: HxW or HxWxC image.
        b: Image of the same shape.
        data_range: Dynamic range of the pixel values.

    Returns:
        SSIM in [-1, 1].
    """
    a, b = _check_pair(a, b)
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ValueError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.shape[:2]}")
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    window = gaussian_window()
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    return float(np.mean([_ssim_channel(a[..., c], b[..., c], window, c1, c2) for c in range(a.shape[2])]))


def inception_score_from_probabilities(probs: np.ndarray) -> float:
    """exp(mean KL(p(y|x) || p(y))) for an (N, K) matrix of class probabilities."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise ValueError("the inception score needs a non-empty (N, K) probability matrix")
    if np.any(probs < -PROBABILITY_TOLERANCE) or np.any(np.abs(probs.sum(axis=1) - 1.0) > PROBABILITY_TOLERANCE):
        raise ValueError("classifier outputs are not probability vectors")
    probs = np.clip(probs, 0.0, 1.0)
    marginal = probs.mean(axis=0, keepdims=True)
    kl = (xlogy(probs, probs) - xlogy(probs, marginal)).sum(axis=1)
    return float(np.exp(kl.mean()))


def inception_score(classifier: Classifier, images: Sequence[np.ndarray]) -> float:
    """
    Inception score of a set of images under a probabilistic classifier.

    Args:
        classifier: Object with ``predict_proba(images)`` or a callable returning
            (N, K) class probabilities for an (N, H, W, 3) array.
        images: Generated images in [-1, 1].

    Returns:
        Score in [1, K].
    """
    if len(images) == 0:
        raise ValueError("the inception score needs at least one image")
    batch = np.stack([np.asarray(img, dtype=np.float32) for img in images])
    predict = getattr(classifier, "predict_proba", classifier)
    return inception_score_from_probabilities(predict(batch))


def _unit_normalize(feature: torch.Tensor, floor: torch.Tensor) -> torch.Tensor:
    norm_sq = torch.sum(feature ** 2, dim=1, keepdim=True)
    return feature / torch.sqrt(norm_sq + floor ** 2 + FEATURE_EPS)


def _normalized_pair(fa: torch.Tensor, fb: torch.Tensor) -> tuple:
    # floor shared by both maps so d(a, b) == d(b, a)
    norms = torch.cat([fa, fb], dim=2).pow(2).sum(dim=1, keepdim=True).sqrt()
    floor = NORM_FLOOR * norms.mean(dim=(2, 3), keepdim=True)
    return _unit_normalize(fa, floor), _unit_normalize(fb, floor)


def lpips_like_tensor(feature_net: IdentityEmbedder, a: torch.Tensor, b: torch.Tensor,
                      layers: Optional[Sequence[int]] = None) -> torch.Tensor:
    """Per-sample perceptual distance for (B, 3, H, W) batches."""
    if not getattr(feature_net, "frozen", False):
        raise EmbedderNotFrozenError("lpips_like requires a frozen feature network")
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
    with torch.no_grad():
        feats_a, feats_b = feature_net.features(a), feature_net.features(b)
    selected = range(len(feats_a)) if layers is None else layers
    total = torch.zeros(a.shape[0], dtype=torch.float64)
    for i in selected:
        ua, ub = _normalized_pair(feats_a[i].double(), feats_b[i].double())
        total += ((ua - ub) ** 2).sum(dim=1).mean(dim=(1, 2))
    return total


def lpips_like(feature_net: IdentityEmbedder, a: np.ndarray, b: np.ndarray,
               layers: Optional[Sequence[int]] = None) -> float:
    """
    Learned perceptual distance between two HxWx3 images in [-1, 1].

    Feature maps of every selected stage are normalised along channels; the
    squared difference is summed over channels, averaged over positions and summed
    over stages. The channel norm is softened by NORM_FLOOR times the mean norm of
    the two maps, so near-silent positions contribute little.
    """
    a, b = _check_pair(a, b)
    return float(lpips_like_tensor(feature_net, to_tensor(a), to_tensor(b), layers)[0])
