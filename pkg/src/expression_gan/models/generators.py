"""
U-Net generators.

Both generators share the encoder: a stack of stride-2 4x4 convolutions down to a
1x1 bottleneck, leaky rectifiers (slope 0.2) and instance normalisation except on
the first and innermost stages. Each label vector passes through its own fully
connected layer whose output (one value per bottleneck channel) is concatenated
with the bottleneck embedding.

The expression generator decodes with transposed convolutions, plain rectifiers,
skip connections and a final Tanh. The landmark generator decodes the bottleneck
into 68 coordinates with a small rectifier MLP, squashes them into the canvas and
renders them into a landmark image against its input. Dropout (p=0.5) on the
first three decoder blocks is the only source of noise.
"""

import logging
from typing import List, Optional, Sequence, Set, Tuple

import numpy as np
import torch
import torch.nn as nn

from ..landmarks.codec import render_tensor
from ..data.types import NUM_LANDMARKS
from ..landmarks.layout import canonical_layout
from .specs import GeneratorSpec

logger = logging.getLogger(__name__)

LEAKY_SLOPE = 0.2
DROPOUT_P = 0.5
DROPOUT_BLOCKS = 3


def init_weights(module: nn.Module, gain: float = 0.02) -> None:
    """Normal(0, 0.02) initialisation for conv and linear layers, N(1, 0.02) for affine norms."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            nn.init.normal_(m.weight, 0.0, gain)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.InstanceNorm2d) and m.affine:
            nn.init.normal_(m.weight, 1.0, gain)
            nn.init.zeros_(m.bias)


class UNetEncoder(nn.Module):
    """Downsampling path; returns every stage's activation, innermost last."""

    def __init__(self, in_channels: int, widths: Sequence[int]):
        super().__init__()
        blocks = []
        prev = in_channels
        last = len(widths) - 1
        for i, width in enumerate(widths):
            layers: List[nn.Module] = []
            if i > 0:
                layers.append(nn.LeakyReLU(LEAKY_SLOPE))
            layers.append(nn.Conv2d(prev, width, kernel_size=4, stride=2, padding=1, bias=(i == 0 or i == last)))
            if 0 < i < last:
                layers.append(nn.InstanceNorm2d(width, affine=True))
            blocks.append(nn.Sequential(*layers))
            prev = width
        self.blocks = nn.ModuleList(blocks)

    def forward(self, x: torch.Tensor) -> List[torch.Tensor]:
        features = []
        for block in self.blocks:
            x = block(x)
            features.append(x)
        return features


class LabelInjection(nn.Module):
    """One fully connected layer per label vector, concatenated onto the bottleneck."""

    def __init__(self, label_dims: Sequence[int], channels: int):
        super().__init__()
        self.label_dims = list(label_dims)
        self.fcs = nn.ModuleList(nn.Linear(dim, channels) for dim in self.label_dims)

    @property
    def out_channels_per_label(self) -> int:
        return self.fcs[0].out_features if self.fcs else 0

    def forward(self, bottleneck: torch.Tensor, labels: Sequence[torch.Tensor]) -> torch.Tensor:
        labels = [l for l in labels if l is not None]
        if len(labels) != len(self.fcs):
            raise ValueError(f"expected {len(self.fcs)} label vectors, got {len(labels)}")
        parts = [bottleneck]
        for fc, dim, label in zip(self.fcs, self.label_dims, labels):
            if label.dim() != 2 or label.shape[1] != dim:
                raise ValueError(f"label vector must have shape (B, {dim}), got {tuple(label.shape)}")
            parts.append(fc(label.to(bottleneck.dtype)).view(label.shape[0], -1, 1, 1))
        return torch.cat(parts, dim=1)


def _check_input(spec: GeneratorSpec, x: torch.Tensor) -> None:
    if x.dim() != 4 or x.shape[1] != spec.in_channels:
        raise ValueError(f"expected (B, {spec.in_channels}, H, W) input, got {tuple(x.shape)}")
    if x.shape[2] != spec.resolution or x.shape[3] != spec.resolution:
        raise ValueError(f"expected {spec.resolution}x{spec.resolution} input, got {x.shape[2]}x{x.shape[3]}")


class ExpressionGenerator(nn.Module):
    """G_e: (conditional image ++ landmark image, labels) -> face image in (-1, 1)."""

    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        self.spec = spec
        widths = spec.widths
        self.encoder = UNetEncoder(spec.in_channels, widths)
        self.labels = LabelInjection(spec.label_dims, widths[-1])
        self.disabled_skips: Set[int] = set()

        bottleneck = widths[-1] * (1 + len(spec.label_dims))
        ups = []
        prev = bottleneck
        for n, i in enumerate(reversed(range(len(widths) - 1))):
            layers: List[nn.Module] = [
                nn.ReLU(),
                nn.ConvTranspose2d(prev, widths[i], kernel_size=4, stride=2, padding=1, bias=False),
                nn.InstanceNorm2d(widths[i], affine=True),
            ]
            if n < DROPOUT_BLOCKS:
                layers.append(nn.Dropout(DROPOUT_P))
            ups.append(nn.Sequential(*layers))
            prev = widths[i] * 2
        self.ups = nn.ModuleList(ups)
        self.head = nn.Sequential(
            nn.ReLU(),
            nn.ConvTranspose2d(prev, spec.out_channels, kernel_size=4, stride=2, padding=1),
            nn.Tanh(),
        )
        init_weights(self)

    def forward(self, x: torch.Tensor, l_e: torch.Tensor, l_i: Optional[torch.Tensor] = None) -> torch.Tensor:
        _check_input(self.spec, x)
        features = self.encoder(x)
        h = self.labels(features[-1], [l_e, l_i] if self.spec.label_dims else [])
        for up, i in zip(self.ups, reversed(range(len(features) - 1))):
            h = up(h)
            skip = features[i]
            if i in self.disabled_skips:
                skip = torch.zeros_like(skip)
            h = torch.cat([h, skip], dim=1)
        return self.head(h)


class LandmarkGenerator(nn.Module):
    """G_l: (face image, labels) -> (68 coordinates, rendered landmark image)."""

    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        if not spec.coordinate_head:
            raise ValueError("the landmark generator needs coordinate_head=True")
        self.spec = spec
        widths = spec.widths
        self.encoder = UNetEncoder(spec.in_channels, widths)
        self.labels = LabelInjection(spec.label_dims, widths[-1])

        in_features = widths[-1] * (1 + len(spec.label_dims))
        layers: List[nn.Module] = []
        for _ in range(DROPOUT_BLOCKS):
            layers += [nn.Linear(in_features, spec.coord_hidden), nn.ReLU(), nn.Dropout(DROPOUT_P)]
            in_features = spec.coord_hidden
        self.decoder = nn.Sequential(*layers)
        self.coords = nn.Linear(spec.coord_hidden, 2 * NUM_LANDMARKS)
        init_weights(self)
        self.set_mean_shape(canonical_layout(spec.resolution))

    def set_mean_shape(self, layout: np.ndarray) -> None:
        """Initialise the coordinate bias so zero hidden activity decodes to `layout`."""
        frac = np.clip(np.asarray(layout, dtype=np.float64) / self.spec.resolution, 1e-3, 1 - 1e-3)
        logit = np.log(frac / (1.0 - frac)).reshape(-1)
        with torch.no_grad():
            self.coords.bias.copy_(torch.from_numpy(logit).to(self.coords.bias.dtype))

    def forward(self, x: torch.Tensor, l_e: torch.Tensor,
                l_i: Optional[torch.Tensor] = None) -> Tuple[torch.Tensor, torch.Tensor]:
        _check_input(self.spec, x)
        features = self.encoder(x)
        h = self.labels(features[-1], [l_e, l_i] if self.spec.label_dims else [])
        h = self.decoder(h.flatten(1))
        coords = torch.sigmoid(self.coords(h)).view(-1, NUM_LANDMARKS, 2) * self.spec.resolution
        image = render_tensor(coords, x, self.spec.disc_radius, self.spec.softness, self.spec.color_mode)
        return coords, image


def build_landmark_generator(spec: GeneratorSpec) -> LandmarkGenerator:
    logger.debug(f"Building landmark generator: {spec}")
    return LandmarkGenerator(spec)


def build_expression_generator(spec: GeneratorSpec) -> ExpressionGenerator:
    if spec.in_channels != 6:
        raise ValueError(f"the expression generator takes 6 input channels, got {spec.in_channels}")
    logger.debug(f"Building expression generator: {spec}")
    return ExpressionGenerator(spec)
