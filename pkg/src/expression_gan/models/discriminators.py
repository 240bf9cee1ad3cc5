import logging
from typing import List

import torch
import torch.nn as nn

from .generators import LEAKY_SLOPE, init_weights
from .specs import MAX_WIDTH_MULT, DiscriminatorSpec

logger = logging.getLogger(__name__)


class PatchDiscriminator(nn.Module):
    """PatchGAN: every output cell is the probability that its patch is real."""

    def __init__(self, in_channels: int = 3, base_filters: int = 64, n_layers: int = 3):
        super().__init__()
        self.n_layers = n_layers
        layers: List[nn.Module] = [
            nn.Conv2d(in_channels, base_filters, kernel_size=4, stride=2, padding=1),
            nn.LeakyReLU(LEAKY_SLOPE),
        ]
        mult = 1
        for n in range(1, n_layers):
            prev, mult = mult, min(2 ** n, MAX_WIDTH_MULT)
            layers += [
                nn.Conv2d(base_filters * prev, base_filters * mult, kernel_size=4, stride=2, padding=1, bias=False),
                nn.InstanceNorm2d(base_filters * mult, affine=True),
                nn.LeakyReLU(LEAKY_SLOPE),
            ]
        # stride-1 penultimate layer
        prev, mult = mult, min(2 ** n_layers, MAX_WIDTH_MULT)
        layers += [
            nn.Conv2d(base_filters * prev, base_filters * mult, kernel_size=4, stride=1, padding=1, bias=False),
            nn.InstanceNorm2d(base_filters * mult, affine=True),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(base_filters * mult, 1, kernel_size=4, stride=1, padding=1),
            nn.Sigmoid(),
        ]
        self.model = nn.Sequential(*layers)
        init_weights(self)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.model(x)


class Discriminator(nn.Module):
    """One PatchGAN, or two at different receptive fields when dual.

    forward() returns the list of patch maps; losses average over it.
    """

    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        self.spec = spec
        self.members = nn.ModuleList(
            PatchDiscriminator(spec.in_channels, spec.base_filters, n) for n in spec.scales
        )

    def forward(self, x: torch.Tensor) -> List[torch.Tensor]:
        if x.dim() != 4 or x.shape[1] != self.spec.in_channels:
            raise ValueError(f"expected (B, {self.spec.in_channels}, H, W) input, got {tuple(x.shape)}")
        return [member(x) for member in self.members]


def build_discriminator(spec: DiscriminatorSpec) -> Discriminator:
    logger.debug(f"Building discriminator: {spec}")
    return Discriminator(spec)
