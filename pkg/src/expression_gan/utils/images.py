import os
import logging
from typing import Sequence, Tuple

import numpy as np
import torch
from PIL import Image

logger = logging.getLogger(__name__)


def normalize(pixels: np.ndarray) -> np.ndarray:
    """Map 8-bit pixel values to float32 in [-1, 1]."""
    return pixels.astype(np.float32) / 127.5 - 1.0


def denormalize(image: np.ndarray) -> np.ndarray:
    """Map a [-1, 1] image back to uint8; inverse of normalize on 8-bit input."""
    values = np.rint((np.asarray(image, dtype=np.float64) + 1.0) * 127.5)
    return np.clip(values, 0, 255).astype(np.uint8)


def load_image(path: str, resolution: int) -> Tuple[np.ndarray, Tuple[int, int]]:
    """
    Load an RGB image, resize it to resolution x resolution and normalize it.

    Args:
        path: Image file path.
        resolution: Target side length.

    Returns:
        (image HxWx3 float32 in [-1, 1], (source_width, source_height))
    """
    with Image.open(path) as img:
        img = img.convert("RGB")
        size = img.size
        if size != (resolution, resolution):
            img = img.resize((resolution, resolution), Image.BILINEAR)
        pixels = np.asarray(img, dtype=np.uint8)
    return normalize(pixels), size


def save_png(image: np.ndarray, path: str) -> None:
    """Write a [-1, 1] HxWx3 image as an 8-bit PNG."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    Image.fromarray(denormalize(image)).save(path, format="PNG")


def to_tensor(image: np.ndarray) -> torch.Tensor:
    """HxWx3 array -> 1x3xHxW float tensor."""
    return torch.from_numpy(np.ascontiguousarray(image, dtype=np.float32)).permute(2, 0, 1).unsqueeze(0)


def to_image(tensor: torch.Tensor) -> np.ndarray:
    """3xHxW (or 1x3xHxW) tensor -> HxWx3 float32 array."""
    if tensor.dim() == 4:
        tensor = tensor[0]
    return tensor.detach().cpu().permute(1, 2, 0).numpy().astype(np.float32)


def contact_sheet(rows: Sequence[Sequence[np.ndarray]], padding: int = 2) -> np.ndarray:
    """
    Tile rows of equally sized [-1, 1] images into one image, white padded.

    Args:
        rows: Sequence of rows, each a sequence of HxWx3 images.
        padding: Pixels between tiles.

    Returns:
        The tiled image as a [-1, 1] array.
    """
    if not rows or not rows[0]:
        raise ValueError("contact_sheet needs at least one image")
    h, w, _ = rows[0][0].shape
    n_cols = max(len(r) for r in rows)
    sheet = np.ones((len(rows) * (h + padding) + padding, n_cols * (w + padding) + padding, 3),
                    dtype=np.float32)
    for i, row in enumerate(rows):
        for j, tile in enumerate(row):
            top = padding + i * (h + padding)
            left = padding + j * (w + padding)
            sheet[top:top + h, left:left + w] = tile
    return sheet
