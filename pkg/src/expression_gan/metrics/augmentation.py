"""
Expression classification with real, traditionally augmented and generated data.

Each mode trains the same small CNN from the same seed and reports test accuracy:

    Real/Real    train on real, test on real
    Real/Syn     train on real, test on generated faces
    Real+Nor     real plus noise/rotation/crop copies, test on real
    Real+Syn     real plus generated faces, test on real

Real+Nor adds exactly as many augmented images as Real+Syn adds generated ones.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from PIL import Image
from scipy import ndimage
from tqdm import tqdm

from ..data.types import Dataset
from ..errors import DatasetError
from ..utils.images import denormalize, normalize
from ..utils.reporting import format_table

logger = logging.getLogger(__name__)

MODES = ("Real/Real", "Real/Syn", "Real+Nor", "Real+Syn")
CLASSIFIER_WIDTHS = (16, 32, 64)
NOISE_STD = 0.05
MAX_ROTATION = 10.0
CROP_FRACTION = 0.9


class ExpressionClassifier(nn.Module):
    """Small CNN over [-1, 1] faces; predict_proba() returns class probabilities."""

    def __init__(self, vocabulary: Sequence[str], widths: Sequence[int] = CLASSIFIER_WIDTHS):
        super().__init__()
        self.vocabulary = list(vocabulary)
        layers: List[nn.Module] = []
        prev = 3
        for width in widths:
            layers += [nn.Conv2d(prev, width, kernel_size=3, stride=2, padding=1), nn.BatchNorm2d(width), nn.ReLU()]
            prev = width
        self.features = nn.Sequential(*layers)
        self.head = nn.Linear(prev, len(self.vocabulary))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(F.adaptive_avg_pool2d(self.features(x), 1).flatten(1))

    def predict_proba(self, images: np.ndarray) -> np.ndarray:
        """(N, H, W, 3) images -> (N, K) probabilities."""
        self.eval()
        x = torch.from_numpy(np.ascontiguousarray(images, dtype=np.float32)).permute(0, 3, 1, 2)
        with torch.no_grad():
            return F.softmax(self(x).double(), dim=1).numpy()

    def predict(self, images: np.ndarray) -> List[str]:
        return [self.vocabulary[i] for i in self.predict_proba(images).argmax(axis=1)]


def _arrays(samples: Iterable, vocabulary: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
    images, labels = [], []
    for image, expression in samples:
        images.append(np.asarray(image, dtype=np.float32))
        labels.append(vocabulary.index(expression))
    return np.stack(images), np.asarray(labels, dtype=np.int64)


def _check_classes(labels: Sequence[str], vocabulary: Sequence[str], name: str) -> None:
    missing = sorted(set(vocabulary) - set(labels))
    if missing:
        raise DatasetError(f"{name} training set has no samples of class(es): {', '.join(missing)}")


def train_classifier(samples: Sequence[Tuple[np.ndarray, str]], vocabulary: Sequence[str], seed: int = 0,
                     epochs: int = 15, batch_size: int = 16, lr: float = 1e-3,
                     progress: bool = False) -> ExpressionClassifier:
    """
    Train an expression classifier.

    Args:
        samples: (image, expression) pairs.
        vocabulary: Expression vocabulary; every class must be present.
        seed: Seed of initialisation and shuffling.
        epochs: Passes over the data.
        batch_size: Minibatch size.
        lr: Adam learning rate.
        progress: Show a progress bar.

    Returns:
        The trained classifier in eval mode.
    """
    _check_classes([label for _, label in samples], vocabulary, "classifier")
    torch.manual_seed(seed)
    generator = torch.Generator().manual_seed(seed)
    images, labels = _arrays(samples, vocabulary)
    x = torch.from_numpy(images).permute(0, 3, 1, 2)
    y = torch.from_numpy(labels)

    model = ExpressionClassifier(vocabulary)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    model.train()
    for _ in tqdm(range(epochs), desc="classifier", disable=not progress):
        order = torch.randperm(len(y), generator=generator)
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            if len(idx) < 2:
                continue
            loss = F.cross_entropy(model(x[idx]), y[idx])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
    model.eval()
    return model


def accuracy(model: ExpressionClassifier, samples: Sequence[Tuple[np.ndarray, str]]) -> float:
    if not samples:
        raise DatasetError("cannot measure accuracy on an empty test set")
    images = np.stack([np.asarray(img, dtype=np.float32) for img, _ in samples])
    predicted = model.predict(images)
    return float(np.mean([p == label for p, (_, label) in zip(predicted, samples)]))


def traditional_augment(image: np.ndarray, kind: str, rng: np.random.Generator) -> np.ndarray:
    """
    One traditionally augmented copy of a [-1, 1] image.

    Args:
        image: HxWx3 image.
        kind: "noise" (Gaussian, std 0.05), "rotate" (up to 10 degrees) or
            "crop" (random 90% crop resized back).
        rng: Random generator.
    """
    if kind == "noise":
        return np.clip(image + rng.normal(0.0, NOISE_STD, image.shape), -1.0, 1.0).astype(np.float32)
    if kind == "rotate":
        angle = rng.uniform(-MAX_ROTATION, MAX_ROTATION)
        return ndimage.rotate(image, angle, axes=(1, 0), reshape=False, order=1, mode="nearest").astype(np.float32)
    if kind == "crop":
        size = image.shape[0]
        crop = max(1, int(round(size * CROP_FRACTION)))
        top, left = rng.integers(0, size - crop + 1, size=2)
        patch = Image.fromarray(denormalize(image[top:top + crop, left:left + crop]))
        return normalize(np.asarray(patch.resize((size, size), Image.BILINEAR)))
    raise ValueError(f"unknown augmentation '{kind}'")


def augment_to_count(real: Dataset, count: int, seed: int = 0) -> List[Tuple[np.ndarray, str]]:
    """`count` augmented copies of real samples, sources cycled in a seeded order."""
    rng = np.random.default_rng(seed)
    kinds = ("noise", "rotate", "crop")
    order = rng.permutation(len(real))
    out = []
    for n in range(count):
        sample = real[int(order[n % len(order)])]
        out.append((traditional_augment(sample.image, kinds[n % len(kinds)], rng), sample.expression))
    return out


@dataclass
class AccuracyTable:
    """Test accuracy and training-set size per augmentation mode."""

    accuracies: Dict[str, float] = field(default_factory=dict)
    train_sizes: Dict[str, int] = field(default_factory=dict)
    test_sizes: Dict[str, int] = field(default_factory=dict)
    seed: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "modes": {
                mode: {"accuracy": acc, "train_size": self.train_sizes[mode], "test_size": self.test_sizes[mode]}
                for mode, acc in self.accuracies.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        rows = [(mode, acc, self.train_sizes[mode], self.test_sizes[mode]) for mode, acc in self.accuracies.items()]
        return format_table(("mode", "accuracy", "train", "test"), rows)


def _pairs(dataset: Dataset) -> List[Tuple[np.ndarray, str]]:
    return [(s.image, s.expression) for s in dataset]


def augmentation_experiment(real_train: Dataset, synth_train: Dataset, real_test: Dataset,
                            modes: Optional[Iterable[str]] = None, seed: int = 0, epochs: int = 15,
                            progress: bool = False) -> AccuracyTable:
    """
    Compare expression classifiers trained with and without generated data.

    Args:
        real_train: Real training faces.
        synth_train: Faces generated from real_train inputs.
        real_test: Real held-out faces.
        modes: Subset of MODES (all four by default).
        seed: Seed shared by every mode.
        epochs: Classifier training epochs.
        progress: Show progress bars.

    Returns:
        AccuracyTable over the requested modes.

    Raises:
        DatasetError: if a class is missing from a training set.
    """
    modes = list(MODES if modes is None else modes)
    unknown = [m for m in modes if m not in MODES]
    if unknown:
        raise ValueError(f"unknown augmentation mode(s) {unknown}; valid modes: {', '.join(MODES)}")
    vocabulary = real_train.vocabulary
    real, synth, test = _pairs(real_train), _pairs(synth_train), _pairs(real_test)

    table = AccuracyTable(seed=seed)
    real_model: Optional[ExpressionClassifier] = None
    for mode in modes:
        if mode in ("Real/Real", "Real/Syn"):
            train_set = real
            if real_model is None:
                real_model = train_classifier(real, vocabulary, seed, epochs, progress=progress)
            model = real_model
        else:
            extra = synth if mode == "Real+Syn" else augment_to_count(real_train, len(synth), seed)
            train_set = real + extra
            _check_classes([label for _, label in train_set], vocabulary, mode)
            model = train_classifier(train_set, vocabulary, seed, epochs, progress=progress)
        test_set = synth if mode == "Real/Syn" else test
        table.accuracies[mode] = accuracy(model, test_set)
        table.train_sizes[mode] = len(train_set)
        table.test_sizes[mode] = len(test_set)
        logger.info(f"{mode}: accuracy {table.accuracies[mode]:.3f} ({len(train_set)} training images)")
    return table
