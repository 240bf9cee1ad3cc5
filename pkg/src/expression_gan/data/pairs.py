import logging
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import torch

from ..errors import DatasetError, LabelError
from ..utils.images import to_tensor
from .types import Dataset, FaceSample, LabelVector, TrainingPair

logger = logging.getLogger(__name__)

PairingPolicy = Literal["cross", "from_neutral"]
NEUTRAL = "neutral"


def one_hot(label: str, vocabulary: Sequence[str]) -> LabelVector:
    """
    Encode a label as a one-hot vector over an ordered vocabulary.

    Raises:
        LabelError: if the label is not in the vocabulary.
    """
    vocabulary = list(vocabulary)
    if label not in vocabulary:
        raise LabelError(label, vocabulary)
    index = vocabulary.index(label)
    values = np.zeros(len(vocabulary), dtype=np.float32)
    values[index] = 1.0
    return LabelVector(values, index, label)


def intensity_one_hot(level: int, levels: int) -> LabelVector:
    """One-hot intensity label for level in 1..levels."""
    if not 1 <= level <= levels:
        raise LabelError(level, range(1, levels + 1))
    values = np.zeros(levels, dtype=np.float32)
    values[level - 1] = 1.0
    return LabelVector(values, level - 1, str(level))


def make_pair(x: FaceSample, y: FaceSample, vocabulary: Sequence[str], intensity_levels: int = 0) -> TrainingPair:
    l_i = intensity_one_hot(y.intensity or 1, intensity_levels) if intensity_levels else None
    return TrainingPair(x=x, y=y, l_e=one_hot(y.expression, vocabulary), l_i=l_i)


def make_training_pairs(dataset: Dataset, policy: PairingPolicy = "cross", seed: int = 0) -> List[TrainingPair]:
    """
    Build within-subject (conditional, target) pairs.

    "cross" emits every ordered pair of a subject's samples with different
    expressions; "from_neutral" only pairs with a neutral conditional image.
    Subjects with fewer than two expressions are skipped with a warning.

    Args:
        dataset: Source dataset.
        policy: "cross" or "from_neutral".
        seed: Seed of the pair ordering.

    Returns:
        Pairs in a seeded, deterministic order.
    """
    if policy not in ("cross", "from_neutral"):
        raise DatasetError(f"unknown pairing policy '{policy}'")

    pairs: List[TrainingPair] = []
    skipped = 0
    for subject, samples in sorted(dataset.by_subject().items()):
        if len({s.expression for s in samples}) < 2:
            skipped += 1
            continue
        if policy == "from_neutral" and not any(s.expression == NEUTRAL for s in samples):
            logger.warning(f"Subject '{subject}' has no '{NEUTRAL}' sample; no from_neutral pairs for it")
            continue
        for x in samples:
            if policy == "from_neutral" and x.expression != NEUTRAL:
                continue
            for y in samples:
                if y.expression == x.expression:
                    continue
                pairs.append(make_pair(x, y, dataset.vocabulary, dataset.intensity_levels))

    if skipped:
        logger.warning(f"Skipped {skipped} subject(s) with a single expression")
    order = np.random.default_rng(seed).permutation(len(pairs))
    logger.info(f"Built {len(pairs)} '{policy}' training pairs from {len(dataset.subjects)} subjects")
    return [pairs[i] for i in order]


@dataclass(frozen=True)
class SplitPolicy:
    """Either hold out whole subjects or a fraction of each expression's samples."""

    kind: Literal["subject_holdout", "sample_fraction"] = "subject_holdout"
    holdout_subjects: int = 2
    test_fraction: float = 0.33

    @classmethod
    def subject_holdout(cls, n: int = 2) -> "SplitPolicy":
        return cls(kind="subject_holdout", holdout_subjects=n)

    @classmethod
    def sample_fraction(cls, fraction: float = 0.33) -> "SplitPolicy":
        return cls(kind="sample_fraction", test_fraction=fraction)


def split(dataset: Dataset, policy: SplitPolicy, seed: int = 0) -> Tuple[Dataset, Dataset]:
    """
    Split a dataset into disjoint train and test sets.

    Raises:
        DatasetError: for a fraction outside (0, 1) or too few subjects.
    """
    rng = np.random.default_rng(seed)
    if policy.kind == "subject_holdout":
        subjects = dataset.subjects
        if not 1 <= policy.holdout_subjects < len(subjects):
            raise DatasetError(f"cannot hold out {policy.holdout_subjects} of {len(subjects)} subjects")
        held = set(rng.choice(subjects, size=policy.holdout_subjects, replace=False).tolist())
        train = dataset.subset(lambda s: s.subject_id not in held)
        test = dataset.subset(lambda s: s.subject_id in held)
    elif policy.kind == "sample_fraction":
        if not 0.0 < policy.test_fraction < 1.0:
            raise DatasetError(f"test fraction must lie in (0, 1), got {policy.test_fraction}")
        test_ids = set()
        for expression in dataset.vocabulary:
            members = [i for i, s in enumerate(dataset) if s.expression == expression]
            n_test = int(round(policy.test_fraction * len(members)))
            test_ids.update(members[i] for i in rng.permutation(len(members))[:n_test])
        train = dataset.with_samples([s for i, s in enumerate(dataset) if i not in test_ids])
        test = dataset.with_samples([s for i, s in enumerate(dataset) if i in test_ids])
    else:
        raise DatasetError(f"unknown split policy '{policy.kind}'")

    logger.info(f"Split ({policy.kind}): {len(train)} train / {len(test)} test samples")
    return train, test


def collate_pairs(pairs: Sequence[TrainingPair]) -> Dict[str, Optional[torch.Tensor]]:
    """
    Stack pairs into batch tensors.

    Returns:
        Dict with x, y (B,3,H,W), l (B,68,2), l_e (B,K) and l_i (B,L) or None.
    """
    if not pairs:
        raise DatasetError("cannot collate an empty batch")
    batch: Dict[str, Optional[torch.Tensor]] = {
        "x": torch.cat([to_tensor(p.x.image) for p in pairs]),
        "y": torch.cat([to_tensor(p.y.image) for p in pairs]),
        "l": torch.from_numpy(np.stack([p.l.points for p in pairs])).float(),
        "l_e": torch.from_numpy(np.stack([p.l_e.values for p in pairs])),
        "l_i": None,
    }
    if pairs[0].l_i is not None:
        batch["l_i"] = torch.from_numpy(np.stack([p.l_i.values for p in pairs]))
    return batch
