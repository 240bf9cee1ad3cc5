import math
import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)

MAX_WIDTH_MULT = 8


@dataclass(frozen=True)
class GeneratorSpec:
    """
    Architecture of a U-Net style generator.

    Attributes:
        resolution: Square input size, a power of two >= 32.
        in_channels: 3 for the landmark generator, 6 for the expression generator.
        out_channels: Channels of the decoded image (expression generator).
        base_filters: Width of the first encoder stage.
        label_dims: Sizes of the label vectors injected at the bottleneck.
        coordinate_head: Decode 68 coordinates instead of an image.
        coord_hidden: Width of the coordinate head's hidden layers.
        radius: Landmark disc radius used when rendering coordinates.
        softness: Disc edge softness used when rendering coordinates.
        color_mode: "sampled" or "fixed_black".
    """

    resolution: int = 256
    in_channels: int = 3
    out_channels: int = 3
    base_filters: int = 64
    label_dims: List[int] = field(default_factory=list)
    coordinate_head: bool = False
    coord_hidden: int = 256
    radius: Optional[float] = None
    softness: float = 1.0
    color_mode: str = "sampled"

    def __post_init__(self):
        if self.resolution < 32 or self.resolution & (self.resolution - 1):
            raise ValueError(f"resolution must be a power of two >= 32, got {self.resolution}")
        if self.in_channels < 1 or self.out_channels < 1 or self.base_filters < 1:
            raise ValueError("channel counts must be positive")
        if any(d < 1 for d in self.label_dims):
            raise ValueError(f"label sizes must be positive, got {self.label_dims}")
        object.__setattr__(self, "label_dims", list(self.label_dims))

    @property
    def depth(self) -> int:
        return int(round(math.log2(self.resolution)))

    @property
    def widths(self) -> List[int]:
        """Encoder stage widths, doubling per stage and capped at 8x base_filters."""
        return [self.base_filters * min(2 ** i, MAX_WIDTH_MULT) for i in range(self.depth)]

    @property
    def disc_radius(self) -> float:
        return self.radius if self.radius is not None else 4.0 * self.resolution / 256.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GeneratorSpec":
        return cls(**data)


@dataclass(frozen=True)
class DiscriminatorSpec:
    """PatchGAN discriminator; n_layers=3 gives a 70x70 receptive field."""

    in_channels: int = 3
    n_layers: int = 3
    base_filters: int = 64
    dual: bool = False

    def __post_init__(self):
        if self.n_layers < 1:
            raise ValueError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.in_channels < 1 or self.base_filters < 1:
            raise ValueError("channel counts must be positive")

    @property
    def scales(self) -> List[int]:
        """Layer counts of the member discriminators."""
        if not self.dual:
            return [self.n_layers]
        return [self.n_layers, max(1, self.n_layers - 1)]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DiscriminatorSpec":
        return cls(**data)


def receptive_field(n_layers: int) -> int:
    """Receptive field of a PatchGAN with n_layers stride-2 convolutions."""
    rf = 1
    # output conv and penultimate conv: kernel 4, stride 1
    for _ in range(2):
        rf += 3
    for _ in range(n_layers):
        rf = rf * 2 + 2
    return rf


def patch_map_size(input_size: int, n_layers: int) -> int:
    """Side length of the patch map for a square input."""
    size = input_size
    for _ in range(n_layers):
        size = (size + 2 - 4) // 2 + 1
    for _ in range(2):
        size = size + 2 - 4 + 1
    return size
