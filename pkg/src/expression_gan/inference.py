import json
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Union

import numpy as np
import torch

from .checkpoint import TrainState, load_checkpoint
from .data.pairs import intensity_one_hot, make_training_pairs, one_hot
from .data.types import Dataset, FaceSample, LandmarkSet
from .errors import DatasetError, LabelError
from .landmarks.codec import LandmarkImage
from .utils.images import to_image, to_tensor
from .utils.torch_utils import set_dropout

logger = logging.getLogger(__name__)

Checkpoint = Union[str, TrainState]


@dataclass
class GenerationResult:
    """Generated landmarks, landmark image and face for one input image."""

    landmarks: LandmarkSet
    landmark_image: LandmarkImage
    face: np.ndarray
    expression: str
    intensity: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "expression": self.expression,
            "intensity": self.intensity,
            "landmarks": self.landmarks.to_flat(),
            "radius": self.landmark_image.radius,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def resolve_checkpoint(checkpoint: Checkpoint) -> TrainState:
    if isinstance(checkpoint, TrainState):
        return checkpoint
    return load_checkpoint(checkpoint, restore_rng=False)


def generate(checkpoint: Checkpoint, image: np.ndarray, expression: str, intensity: Optional[int] = None,
             deterministic: bool = False) -> GenerationResult:
    """
    Translate a single face to a target expression.

    G_l produces the target landmarks from the image alone and G_e renders the
    face from them. Dropout stays active unless `deterministic` is set.

    Args:
        checkpoint: Checkpoint directory or an in-memory TrainState.
        image: HxWx3 face in [-1, 1] at the model resolution.
        expression: Target expression label.
        intensity: Target intensity level for intensity-conditioned models
            (defaults to the highest level).
        deterministic: Disable dropout.

    Returns:
        GenerationResult.
    """
    state = resolve_checkpoint(checkpoint)
    if expression not in state.vocabulary:
        raise LabelError(expression, state.vocabulary)
    image = np.asarray(image, dtype=np.float32)
    if image.shape != (state.resolution, state.resolution, 3):
        raise DatasetError(f"input image shape {image.shape} does not match the model resolution "
                           f"{state.resolution}x{state.resolution}")

    l_i = None
    if state.intensity_levels:
        level = state.intensity_levels if intensity is None else intensity
        l_i = torch.from_numpy(intensity_one_hot(level, state.intensity_levels).values).unsqueeze(0)
        intensity = level
    l_e = torch.from_numpy(one_hot(expression, state.vocabulary).values).unsqueeze(0)

    g_l, g_e = state.nets["g_l"], state.nets["g_e"]
    g_l.eval()
    g_e.eval()
    if not deterministic:
        set_dropout(g_l, True)
        set_dropout(g_e, True)

    x = to_tensor(image)
    with torch.no_grad():
        coords, lm = g_l(x, l_e, l_i)
        face = g_e(torch.cat([x, lm], dim=1), l_e, l_i)

    points = coords[0].double().numpy()
    landmark_image = LandmarkImage(image=to_image(lm), radius=g_l.spec.disc_radius, provenance="generated")
    return GenerationResult(landmarks=LandmarkSet(points), landmark_image=landmark_image, face=to_image(face),
                            expression=expression, intensity=intensity)


def synthesize_dataset(checkpoint: Checkpoint, real_train: Dataset, seed: int = 0,
                       deterministic: bool = False) -> Dataset:
    """
    Generate a labelled synthetic set from within-subject pairs of real inputs.

    Every real sample is translated to every other expression of its subject; the
    generated face is labelled with the target expression and keeps the subject id.

    Args:
        checkpoint: Trained model.
        real_train: Real training dataset supplying the inputs.
        seed: Seed of the dropout noise and pair order.
        deterministic: Disable dropout.

    Returns:
        Dataset of generated faces with the generated landmarks.
    """
    state = resolve_checkpoint(checkpoint)
    torch.manual_seed(seed)
    samples: List[FaceSample] = []
    for n, pair in enumerate(make_training_pairs(real_train, "cross", seed)):
        intensity = pair.y.intensity if state.intensity_levels else None
        result = generate(state, pair.x.image, pair.y.expression, intensity, deterministic)
        samples.append(FaceSample(
            image=np.clip(result.face, -1.0, 1.0),
            landmarks=result.landmarks,
            subject_id=pair.x.subject_id,
            expression=pair.y.expression,
            intensity=pair.y.intensity,
            source_path=f"generated://{pair.x.source_path}->{pair.y.expression}/{n:06d}",
        ))
    logger.info(f"Generated {len(samples)} synthetic training faces")
    return Dataset(tuple(samples), real_train.vocabulary, real_train.intensity_levels, real_train.resolution,
                   {"generated_from": real_train.metadata.get("manifest", "")})
