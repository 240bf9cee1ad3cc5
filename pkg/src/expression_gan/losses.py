"""
Loss terms of the two-stage objective.

All functions take torch tensors and return scalar tensors so they can be used
both for optimisation and for reporting. Reductions are means.
"""

import json
import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, Sequence, Union

import numpy as np
import torch
import torch.nn.functional as F

from .config import LossWeights
from .data.types import NUM_LANDMARKS, LandmarkSet
from .errors import EmbedderNotFrozenError

logger = logging.getLogger(__name__)

EPS = 1e-7
SQRT_DELTA = 1e-8

PatchMaps = Union[torch.Tensor, Sequence[torch.Tensor]]
Scalar = Union[float, torch.Tensor]


def _as_list(outputs: PatchMaps):
    return [outputs] if isinstance(outputs, torch.Tensor) else list(outputs)


def _check_shapes(a: torch.Tensor, b: torch.Tensor, name: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{name}: shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")


def bce(prediction: torch.Tensor, target: Union[torch.Tensor, float]) -> torch.Tensor:
    """Binary cross entropy with probabilities clamped to [EPS, 1 - EPS]."""
    if not isinstance(target, torch.Tensor):
        target = torch.full_like(prediction, float(target))
    _check_shapes(prediction, target, "bce")
    p = prediction.clamp(EPS, 1.0 - EPS)
    return -(target * torch.log(p) + (1.0 - target) * torch.log(1.0 - p)).mean()


def discriminator_loss(real_out: PatchMaps, fake_out: PatchMaps) -> torch.Tensor:
    """Half the sum of the real and fake terms, averaged over dual discriminators."""
    reals, fakes = _as_list(real_out), _as_list(fake_out)
    if len(reals) != len(fakes):
        raise ValueError("real and fake outputs come from different discriminator counts")
    terms = [0.5 * (bce(r, 1.0) + bce(f, 0.0)) for r, f in zip(reals, fakes)]
    return torch.stack(terms).mean()


def generator_adversarial_loss(fake_out: PatchMaps) -> torch.Tensor:
    """Non-saturating generator loss: bce(D(fake), 1)."""
    return torch.stack([bce(f, 1.0) for f in _as_list(fake_out)]).mean()


def landmark_recon_loss(predicted: torch.Tensor, target: Union[torch.Tensor, LandmarkSet]) -> torch.Tensor:
    """
    Mean per-point Euclidean distance between predicted and target landmarks.

    Args:
        predicted: (B, 136) or (B, 68, 2) coordinates (a single set may omit B).
        target: Tensor of the same shape, or a LandmarkSet.

    Returns:
        Batch mean of the per-sample mean distance.
    """
    if isinstance(target, LandmarkSet):
        target = torch.from_numpy(np.asarray(target.points)).to(predicted.dtype)
    pred = predicted.reshape(-1, NUM_LANDMARKS, 2)
    tgt = target.reshape(-1, NUM_LANDMARKS, 2).to(predicted.dtype)
    _check_shapes(pred, tgt, "landmark_recon_loss")
    sq = ((pred - tgt) ** 2).sum(dim=-1)
    return torch.sqrt(sq + SQRT_DELTA).mean()


def smooth_l12(prediction: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Per-element 0.5*d^2 for |d| < 1, |d| - 0.5 otherwise, averaged."""
    _check_shapes(prediction, target, "smooth_l12")
    return F.smooth_l1_loss(prediction, target, reduction="mean", beta=1.0)


def reconstruction_norm(prediction: torch.Tensor, target: torch.Tensor, mode: str = "L1") -> torch.Tensor:
    """Mean absolute (L1) or mean squared (L2) difference."""
    _check_shapes(prediction, target, "reconstruction_norm")
    mode = mode.upper()
    if mode == "L1":
        return F.l1_loss(prediction, target)
    if mode == "L2":
        return F.mse_loss(prediction, target)
    raise ValueError(f"unknown reconstruction mode '{mode}'")


def pixel_loss(prediction: torch.Tensor, target: torch.Tensor, recon_mode: str = "l12") -> torch.Tensor:
    """Stage-II pixel term selected by the configured recon_mode."""
    if recon_mode == "l12":
        return smooth_l12(prediction, target)
    return reconstruction_norm(prediction, target, recon_mode)


def identity_loss(embedder, y: torch.Tensor, y_hat: torch.Tensor) -> torch.Tensor:
    """
    L1 distance between frozen identity embeddings of target and generated faces.

    Gradients flow into y_hat only.

    Raises:
        EmbedderNotFrozenError: if any embedder parameter is trainable.
    """
    if not getattr(embedder, "frozen", False) or any(p.requires_grad for p in embedder.parameters()):
        raise EmbedderNotFrozenError("identity loss requires a frozen embedder")
    _check_shapes(y, y_hat, "identity_loss")
    with torch.no_grad():
        target = embedder.embed_tensor(y)
    return (target.to(y_hat.dtype) - embedder.embed_tensor(y_hat)).abs().mean()


def stage1_objective(adv_gl: Scalar, landmark_recon: Scalar, weights: LossWeights) -> Scalar:
    return adv_gl + weights.lambda1 * landmark_recon


def stage2_objective(adv_ge: Scalar, l12: Scalar, identity: Scalar, weights: LossWeights) -> Scalar:
    return adv_ge + weights.lambda2 * l12 + weights.lambda3 * identity


def full_objective(stage1_total: Scalar, stage2_total: Scalar) -> Scalar:
    return stage1_total + stage2_total


@dataclass
class LossReport:
    """Scalar record of one training step."""

    step: int = 0
    adv_gl: float = 0.0
    landmark_recon: float = 0.0
    adv_ge: float = 0.0
    l12: float = 0.0
    identity: float = 0.0
    d_l: float = 0.0
    d_e: float = 0.0
    stage1_total: float = 0.0
    stage2_total: float = 0.0
    full: float = 0.0
    d_l_real: float = 0.0
    d_l_fake: float = 0.0
    d_e_real: float = 0.0
    d_e_fake: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LossReport":
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})

    def summary(self) -> str:
        return (f"step {self.step}: full={self.full:.4f} stage1={self.stage1_total:.4f} "
                f"stage2={self.stage2_total:.4f} d_l={self.d_l:.4f} d_e={self.d_e:.4f}")
