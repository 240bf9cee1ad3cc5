"""
Landmark image encoding and decoding.

A landmark image is white except for one disc per landmark. In "sampled" mode a
disc takes the colour of the source face at the landmark point; in "fixed_black"
mode every disc is black. With softness > 0 the disc edge falls off as a Gaussian
so the image is differentiable with respect to the coordinates.
"""

import logging
from dataclasses import dataclass
from typing import Literal, Optional, Union

import numpy as np
import torch
import torch.nn.functional as F
from scipy import ndimage
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from ..data.types import NUM_LANDMARKS, LandmarkSet
from ..errors import LandmarkExtractionError
from .layout import canonical_layout

logger = logging.getLogger(__name__)

ColorMode = Literal["sampled", "fixed_black"]
Provenance = Literal["rendered", "generated"]

_DIST_EPS = 1e-12


@dataclass(frozen=True)
class RenderConfig:
    """Disc radius S_l (pixels), edge softness sigma (pixels) and colour mode."""

    radius: float = 4.0
    softness: float = 1.0
    color_mode: ColorMode = "sampled"

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.softness < 0:
            raise ValueError(f"softness must be non-negative, got {self.softness}")
        if self.color_mode not in ("sampled", "fixed_black"):
            raise ValueError(f"unknown color_mode '{self.color_mode}'")

    @classmethod
    def for_resolution(cls, resolution: int, softness: float = 1.0,
                       color_mode: ColorMode = "sampled") -> "RenderConfig":
        """Radius 4 at 256x256, scaled linearly with resolution."""
        return cls(radius=4.0 * resolution / 256.0, softness=softness, color_mode=color_mode)


@dataclass(frozen=True)
class LandmarkImage:
    image: np.ndarray
    radius: float
    provenance: Provenance = "rendered"
    clamped: bool = False

    @property
    def resolution(self) -> int:
        return int(self.image.shape[0])


@dataclass(frozen=True)
class Extraction:
    """Detailed result of decoding a landmark image."""

    landmarks: LandmarkSet
    n_regions: int
    merged_regions: int


def render_tensor(coords: torch.Tensor, source: torch.Tensor, radius: float, softness: float,
                  color_mode: ColorMode = "sampled") -> torch.Tensor:
    """
    Differentiably render landmark images for a batch.

    Args:
        coords: (B, 68, 2) pixel coordinates (p horizontal, q vertical).
        source: (B, 3, H, W) images in [-1, 1] that discs sample colours from.
        radius: Disc radius in pixels.
        softness: Gaussian edge width; 0 gives hard discs.
        color_mode: "sampled" or "fixed_black".

    Returns:
        (B, 3, H, W) landmark images in [-1, 1].
    """
    batch, _, height, width = source.shape
    dtype, device = coords.dtype, coords.device
    ys = torch.arange(height, dtype=dtype, device=device) + 0.5
    xs = torch.arange(width, dtype=dtype, device=device) + 0.5
    grid_y, grid_x = torch.meshgrid(ys, xs, indexing="ij")
    centers = torch.stack([grid_x.reshape(-1), grid_y.reshape(-1)], dim=-1)  # (HW, 2)

    diff = centers[None, None, :, :] - coords[:, :, None, :]                 # (B, N, HW, 2)
    dist = torch.sqrt((diff * diff).sum(dim=-1) + _DIST_EPS)                 # (B, N, HW)
    owner = dist.argmin(dim=1)                                               # (B, HW)
    nearest = dist.gather(1, owner.unsqueeze(1)).squeeze(1)                  # (B, HW)

    if softness > 0:
        excess = torch.clamp(nearest - radius, min=0.0)
        alpha = torch.exp(-(excess * excess) / (2.0 * softness * softness))
    else:
        alpha = (nearest <= radius).to(dtype)

    if color_mode == "sampled":
        grid = torch.stack([2.0 * coords[..., 0] / width - 1.0,
                            2.0 * coords[..., 1] / height - 1.0], dim=-1).unsqueeze(1)  # (B, 1, N, 2)
        colors = F.grid_sample(source.to(dtype), grid, mode="bilinear", padding_mode="border",
                               align_corners=False).squeeze(2)                # (B, 3, N)
        pixel_color = colors.gather(2, owner.unsqueeze(1).expand(-1, 3, -1))  # (B, 3, HW)
    else:
        pixel_color = torch.full((batch, 3, height * width), -1.0, dtype=dtype, device=device)

    alpha = alpha.unsqueeze(1)
    out = alpha * pixel_color + (1.0 - alpha)
    return out.reshape(batch, 3, height, width)


def render_landmark_image(landmarks: LandmarkSet, source: np.ndarray,
                          config: RenderConfig = RenderConfig(),
                          provenance: Provenance = "rendered") -> LandmarkImage:
    """
    Encode a LandmarkSet as a landmark image against its source face.

    Out-of-bounds landmarks are clamped to the image and the result is flagged.

    Args:
        landmarks: 68 pixel coordinates.
        source: HxWx3 face image in [-1, 1].
        config: Radius, softness and colour mode.
        provenance: "rendered" for ground truth, "generated" for generator output.

    Returns:
        LandmarkImage with an HxWx3 float32 image.
    """
    source = np.asarray(source, dtype=np.float32)
    height, width = source.shape[:2]
    points = landmarks.points
    clamped_points = np.stack([np.clip(points[:, 0], 0, width), np.clip(points[:, 1], 0, height)], axis=1)
    clamped = bool(np.any(clamped_points != points))
    if clamped:
        logger.warning(f"Clamped {int(np.sum(np.any(clamped_points != points, axis=1)))} "
                       f"out-of-bounds landmarks to the {width}x{height} canvas")

    coords = torch.from_numpy(clamped_points).to(torch.float32).unsqueeze(0)
    src = torch.from_numpy(np.ascontiguousarray(source)).permute(2, 0, 1).unsqueeze(0)
    with torch.no_grad():
        out = render_tensor(coords, src, config.radius, config.softness, config.color_mode)
    image = out[0].permute(1, 2, 0).numpy().astype(np.float32)
    return LandmarkImage(image=image, radius=config.radius, provenance=provenance, clamped=clamped)


def locate_landmarks(img: Union[LandmarkImage, np.ndarray], template: Optional[np.ndarray] = None,
                     tolerance: float = 0.1) -> Extraction:
    """
    Decode a landmark image into 68 ordered points.

    Non-white pixels (any channel below 1 - tolerance) are grouped into connected
    regions whose centroids are matched to the template ordering by optimal
    assignment after normalising translation and scale. Template points left
    without a region are filled from the aligned template and flagged.

    Args:
        img: LandmarkImage or HxWx3 array in [-1, 1].
        template: (68, 2) reference layout in pixels; defaults to the canonical face.
        tolerance: Distance from white below which a pixel counts as background.

    Returns:
        Extraction with the LandmarkSet and region statistics.

    Raises:
        LandmarkExtractionError: if the image contains no non-white pixels.
    """
    image = img.image if isinstance(img, LandmarkImage) else np.asarray(img, dtype=np.float32)
    resolution = image.shape[0]
    template = canonical_layout(resolution) if template is None else np.asarray(template, dtype=np.float64)

    mask = np.any(image < 1.0 - tolerance, axis=2)
    labels, n_regions = ndimage.label(mask)
    if n_regions == 0:
        raise LandmarkExtractionError("no landmarks detectable")

    index = np.arange(1, n_regions + 1)
    areas = ndimage.sum(mask, labels, index)
    rows_cols = np.array(ndimage.center_of_mass(mask, labels, index), dtype=np.float64).reshape(-1, 2)
    centroids = rows_cols[:, ::-1] + 0.5  # (row, col) of pixel indices -> (p, q) of pixel centres

    merged = 0
    if n_regions >= 3:
        merged = int(np.sum(areas > 1.8 * np.median(areas)))

    if n_regions >= NUM_LANDMARKS // 2:
        c_mean, t_mean = centroids.mean(axis=0), template.mean(axis=0)
        c_scale = np.sqrt(((centroids - c_mean) ** 2).sum(axis=1).mean()) or 1.0
        t_scale = np.sqrt(((template - t_mean) ** 2).sum(axis=1).mean()) or 1.0
        c_norm = (centroids - c_mean) / c_scale
        t_norm = (template - t_mean) / t_scale
        aligned_template = t_norm * c_scale + c_mean
    else:
        c_norm, t_norm, aligned_template = centroids, template, template

    region_idx, point_idx = linear_sum_assignment(cdist(c_norm, t_norm))
    points = aligned_template.copy()
    points[point_idx] = centroids[region_idx]
    filled = np.ones(NUM_LANDMARKS, dtype=bool)
    filled[point_idx] = False
    points[:, 0] = np.clip(points[:, 0], 0, image.shape[1])
    points[:, 1] = np.clip(points[:, 1], 0, resolution)

    if filled.any() or merged:
        logger.warning(f"Landmark extraction found {n_regions} regions ({merged} merged); "
                       f"filled {int(filled.sum())} points from the template")
    return Extraction(landmarks=LandmarkSet(points, filled), n_regions=int(n_regions),
                      merged_regions=merged)


def extract_landmarks(img: Union[LandmarkImage, np.ndarray], template: Optional[np.ndarray] = None) -> LandmarkSet:
    """Recover a LandmarkSet from a landmark image; see locate_landmarks."""
    return locate_landmarks(img, template).landmarks


def landmark_distance(a: Union[LandmarkSet, np.ndarray], b: Union[LandmarkSet, np.ndarray]) -> float:
    """Mean per-point Euclidean distance between two ordered 68-point sets."""
    pa = a.points if isinstance(a, LandmarkSet) else np.asarray(a, dtype=np.float64).reshape(-1, 2)
    pb = b.points if isinstance(b, LandmarkSet) else np.asarray(b, dtype=np.float64).reshape(-1, 2)
    if pa.shape != (NUM_LANDMARKS, 2) or pb.shape != (NUM_LANDMARKS, 2):
        raise ValueError(f"landmark_distance needs two {NUM_LANDMARKS}-point sets, got {pa.shape} and {pb.shape}")
    return float(np.mean(np.sqrt(np.sum((pa - pb) ** 2, axis=1))))
