import logging
from typing import Any, Dict, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .config_manager import load_config
from .errors import ConfigError

logger = logging.getLogger(__name__)

ColorMode = Literal["sampled", "fixed_black"]
LabelRouting = Literal["Gl_and_Ge", "Gl_only", "Ge_only"]
ReconMode = Literal["l12", "l1", "l2"]
PairingPolicy = Literal["cross", "from_neutral"]


class LossWeights(BaseModel):
    """Weights of the coordinate, pixel and identity terms."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    lambda1: float = Field(2.0, ge=0.0)
    lambda2: float = Field(100.0, ge=0.0)
    lambda3: float = Field(0.1, ge=0.0)


class TrainConfig(BaseModel):
    """Configuration for a training run.

    Field-for-field mirror of the JSON config file. Optimiser and loss-weight
    defaults are the usual pix2pix settings; network sizes are tuned for
    desk-scale runs.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    resolution: int = 256
    epochs: int = Field(200, ge=1)
    batch_size: int = Field(1, ge=1)
    lr: float = Field(2e-4, gt=0.0)
    beta1: float = Field(0.5, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    weights: LossWeights = Field(default_factory=LossWeights)
    dual_discriminators: bool = True
    use_identity_loss: bool = True
    use_landmark_recon: bool = True
    color_mode: ColorMode = "sampled"
    label_routing: LabelRouting = "Gl_and_Ge"
    intensity_conditioning: bool = False
    seed: int = 0

    base_filters: int = Field(64, ge=1)
    disc_layers: int = Field(3, ge=1)
    landmark_radius: Optional[float] = Field(None, gt=0.0)
    softness: float = Field(1.0, ge=0.0)
    recon_mode: ReconMode = "l12"
    pairing_policy: PairingPolicy = "cross"
    detach_stage1_in_stage2: bool = False
    eval_deterministic: bool = True
    max_steps: Optional[int] = Field(None, ge=1)
    checkpoint_every: int = Field(500, ge=1)
    log_every: int = Field(10, ge=1)
    embedder_epochs: int = Field(20, ge=1)
    embedding_dim: int = Field(64, ge=2)
    coord_hidden: int = Field(256, ge=1)

    @field_validator("resolution")
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value < 32 or value & (value - 1):
            raise ValueError("resolution must be a power of two >= 32")
        return value

    @property
    def radius(self) -> float:
        """Landmark disc radius in pixels (4 at 256x256, scaled linearly)."""
        if self.landmark_radius is not None:
            return self.landmark_radius
        return 4.0 * self.resolution / 256.0

    def to_dict(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        """Validate a plain dictionary, converting pydantic errors to ConfigError."""
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
            )
            raise ConfigError(f"Invalid training configuration: {problems}") from e

    @classmethod
    def from_file(cls, config_file: Optional[str] = None) -> "TrainConfig":
        """Load defaults, merge a JSON config file over them and validate."""
        return cls.from_dict(load_config(config_file))

    def replace(self, **changes: Any) -> "TrainConfig":
        data = self.to_dict()
        data.update(changes)
        return TrainConfig.from_dict(data)
