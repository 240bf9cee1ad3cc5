import json
import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import torch

from ..data.pairs import make_training_pairs
from ..data.types import Dataset, LandmarkSet
from ..errors import DatasetError
from ..identity import IdentityEmbedder
from ..inference import Checkpoint, generate, resolve_checkpoint
from ..landmarks.codec import landmark_distance
from ..utils.images import contact_sheet, denormalize, save_png, to_tensor
from ..utils.reporting import format_table
from .augmentation import ExpressionClassifier, train_classifier
from .quality import inception_score, lpips_like_tensor, psnr, ssim

logger = logging.getLogger(__name__)

SHEET_ROWS = 16


@dataclass
class MetricsReport:
    """Mean quality metrics over a test set.

    lpips_like_mean is None when no identity embedder is available; the inception
    score uses the local expression classifier and is not comparable with scores
    computed by large pretrained classifiers.
    """

    psnr_mean: float
    ssim_mean: float
    inception_score: float
    lpips_like_mean: Optional[float]
    landmark_l2_mean: Optional[float]
    n_samples: int
    eval_deterministic: bool = True
    seed: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        rows = [(name, "n/a" if value is None else value) for name, value in self.to_dict().items()]
        return format_table(("metric", "value"), rows)


def score_images(generated: Sequence[np.ndarray], targets: Sequence[np.ndarray],
                 classifier: ExpressionClassifier, embedder: Optional[IdentityEmbedder] = None,
                 generated_landmarks: Optional[Sequence[LandmarkSet]] = None,
                 target_landmarks: Optional[Sequence[LandmarkSet]] = None,
                 eval_deterministic: bool = True, seed: int = 0) -> MetricsReport:
    """
    Compare generated faces with their ground truth.

    Args:
        generated: Generated HxWx3 faces in [-1, 1].
        targets: Ground-truth faces, same order.
        classifier: Expression classifier for the inception score.
        embedder: Frozen identity embedder for lpips_like (skipped when None).
        generated_landmarks: Generated landmark sets for landmark L2.
        target_landmarks: Ground-truth landmark sets, same order.
        eval_deterministic: Recorded in the report.
        seed: Recorded in the report.

    Returns:
        MetricsReport.
    """
    if not generated:
        raise DatasetError("nothing to evaluate")
    if len(generated) != len(targets):
        raise ValueError(f"{len(generated)} generated images for {len(targets)} targets")

    psnrs, ssims = [], []
    for fake, real in zip(generated, targets):
        a = denormalize(fake).astype(np.float64)
        b = denormalize(real).astype(np.float64)
        psnrs.append(psnr(a, b))
        ssims.append(ssim(a, b))

    lpips_mean = None
    if embedder is not None:
        fake_batch = torch.cat([to_tensor(img) for img in generated])
        real_batch = torch.cat([to_tensor(img) for img in targets])
        lpips_mean = float(lpips_like_tensor(embedder, fake_batch, real_batch).mean())

    landmark_mean = None
    if generated_landmarks is not None and target_landmarks is not None:
        landmark_mean = float(np.mean([landmark_distance(g, t) for g, t in zip(generated_landmarks, target_landmarks)]))

    return MetricsReport(
        psnr_mean=float(np.mean(psnrs)),
        ssim_mean=float(np.mean(ssims)),
        inception_score=inception_score(classifier, generated),
        lpips_like_mean=lpips_mean,
        landmark_l2_mean=landmark_mean,
        n_samples=len(generated),
        eval_deterministic=eval_deterministic,
        seed=seed,
    )


def evaluate_model(checkpoint: Checkpoint, test: Dataset, seed: int = 0,
                   classifier: Optional[ExpressionClassifier] = None,
                   embedder: Optional[IdentityEmbedder] = None,
                   sheet_path: Optional[str] = None) -> MetricsReport:
    """
    Evaluate a trained model on the within-subject pairs of a test set.

    For every pair the face generated from x for y's expression is compared with y,
    and the generated landmarks with y's landmarks. Dropout follows the checkpoint's
    eval_deterministic setting; results are a pure function of (checkpoint, test, seed).

    Args:
        checkpoint: Checkpoint directory or TrainState.
        test: Test dataset.
        seed: Seed of pair order, dropout noise and the default classifier.
        classifier: Expression classifier for the inception score; trained on the
            real test faces when omitted.
        embedder: Feature network for lpips_like; defaults to the checkpoint's embedder.
        sheet_path: Optional PNG path for an input / landmarks / generated / target grid.

    Returns:
        MetricsReport.
    """
    state = resolve_checkpoint(checkpoint)
    pairs = make_training_pairs(test, "cross", seed)
    if not pairs:
        raise DatasetError("the test set yields no within-subject pairs")
    deterministic = state.config.eval_deterministic
    torch.manual_seed(seed)

    faces, targets, gen_landmarks, true_landmarks = [], [], [], []
    rows: List[List[np.ndarray]] = []
    for pair in pairs:
        intensity = pair.y.intensity if state.intensity_levels else None
        result = generate(state, pair.x.image, pair.y.expression, intensity, deterministic)
        faces.append(np.clip(result.face, -1.0, 1.0))
        targets.append(pair.y.image)
        gen_landmarks.append(result.landmarks)
        true_landmarks.append(pair.y.landmarks)
        rows.append([pair.x.image, result.landmark_image.image, faces[-1], pair.y.image])

    if classifier is None:
        classifier = train_classifier([(s.image, s.expression) for s in test], test.vocabulary, seed)
    if embedder is None:
        embedder = state.embedder
    report = score_images(faces, targets, classifier, embedder, gen_landmarks, true_landmarks, deterministic, seed)
    if sheet_path:
        save_png(contact_sheet(rows[:SHEET_ROWS]), sheet_path)
    logger.info(f"Evaluated {report.n_samples} test pairs: PSNR {report.psnr_mean:.2f} dB, "
                f"SSIM {report.ssim_mean:.3f}")
    return report
