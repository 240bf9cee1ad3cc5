"""Core data types: landmark sets, face samples, label vectors and datasets."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DatasetError, LabelError

logger = logging.getLogger(__name__)

NUM_LANDMARKS = 68


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class LandmarkSet:
    """68 ordered (p, q) pixel coordinates; p is horizontal, q vertical.

    Pixel (row i, column j) covers [j, j+1) x [i, i+1), so coordinates range over
    [0, W] x [0, H]. `filled` marks points that were not observed but filled from a
    template (see landmarks.codec.extract_landmarks).
    """

    points: np.ndarray
    filled: Optional[np.ndarray] = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.shape != (NUM_LANDMARKS, 2):
            raise ValueError(f"LandmarkSet needs {NUM_LANDMARKS} points, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise ValueError("LandmarkSet coordinates must be finite")
        object.__setattr__(self, "points", _frozen(points))
        filled = np.zeros(NUM_LANDMARKS, dtype=bool) if self.filled is None else np.asarray(self.filled, bool)
        object.__setattr__(self, "filled", _frozen(filled))

    @classmethod
    def from_flat(cls, values: Sequence[float]) -> "LandmarkSet":
        """Build from the manifest's flat p_1, q_1, ..., p_68, q_68 list."""
        flat = np.asarray(values, dtype=np.float64)
        if flat.shape != (2 * NUM_LANDMARKS,):
            raise ValueError(f"expected {2 * NUM_LANDMARKS} values, got {flat.size}")
        return cls(flat.reshape(NUM_LANDMARKS, 2))

    def to_flat(self) -> List[float]:
        return [float(v) for v in self.points.reshape(-1)]

    def scaled(self, sx: float, sy: float) -> "LandmarkSet":
        return LandmarkSet(self.points * np.array([sx, sy]), self.filled)

    def translated(self, dx: float, dy: float) -> "LandmarkSet":
        return LandmarkSet(self.points + np.array([dx, dy]), self.filled)

    def in_bounds(self, width: int, height: int) -> bool:
        p, q = self.points[:, 0], self.points[:, 1]
        return bool(np.all((p >= 0) & (p <= width) & (q >= 0) & (q <= height)))

    def __len__(self) -> int:
        return NUM_LANDMARKS

    def __eq__(self, other) -> bool:
        if not isinstance(other, LandmarkSet):
            return NotImplemented
        return bool(np.array_equal(self.points, other.points))

    __hash__ = None


@dataclass(frozen=True)
class LabelVector:
    """One-hot label; exactly one entry is 1."""

    values: np.ndarray
    hot_index: int
    label: Optional[str] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("LabelVector values must be a non-empty vector")
        if not (0 <= self.hot_index < values.size) or values[self.hot_index] != 1.0 \
                or np.count_nonzero(values) != 1:
            raise ValueError("LabelVector must be one-hot at hot_index")
        object.__setattr__(self, "values", _frozen(values))

    def __len__(self) -> int:
        return int(self.values.size)

    __hash__ = None


@dataclass(frozen=True)
class FaceSample:
    """One annotated face: image in [-1, 1] (HxWx3), landmarks and labels."""

    image: np.ndarray
    landmarks: LandmarkSet
    subject_id: str
    expression: str
    intensity: Optional[int] = None
    source_path: str = ""

    def __post_init__(self):
        image = np.asarray(self.image, dtype=np.float32)
        if image.ndim != 3 or image.shape[2] != 3 or image.shape[0] != image.shape[1]:
            raise ValueError(f"FaceSample image must be square HxWx3, got {image.shape}")
        if image.min() < -1.0 - 1e-6 or image.max() > 1.0 + 1e-6:
            raise ValueError("FaceSample image values must lie in [-1, 1]")
        if not self.landmarks.in_bounds(image.shape[1], image.shape[0]):
            raise ValueError(f"landmarks of {self.source_path or self.subject_id} fall outside the image")
        if self.intensity is not None and self.intensity < 1:
            raise ValueError("intensity levels start at 1")
        object.__setattr__(self, "image", _frozen(image))

    @property
    def resolution(self) -> int:
        return int(self.image.shape[0])

    __hash__ = None


@dataclass(frozen=True)
class TrainingPair:
    """Conditional sample x, target sample y (same subject) and y's labels."""

    x: FaceSample
    y: FaceSample
    l_e: LabelVector
    l_i: Optional[LabelVector] = None

    def __post_init__(self):
        if self.x.subject_id != self.y.subject_id:
            raise ValueError(f"pair mixes subjects {self.x.subject_id} and {self.y.subject_id}")

    @property
    def l(self) -> LandmarkSet:
        return self.y.landmarks


@dataclass(frozen=True)
class Dataset:
    """Immutable, source-path-ordered collection of FaceSamples."""

    samples: Tuple[FaceSample, ...]
    vocabulary: Tuple[str, ...]
    intensity_levels: int = 0
    resolution: int = 0
    metadata: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        samples = tuple(sorted(self.samples, key=lambda s: s.source_path))
        vocabulary = tuple(self.vocabulary)
        if len(set(vocabulary)) != len(vocabulary):
            raise DatasetError("expression vocabulary has duplicates")
        resolution = self.resolution or (samples[0].resolution if samples else 0)
        for sample in samples:
            if sample.expression not in vocabulary:
                raise LabelError(sample.expression, vocabulary)
            if sample.resolution != resolution:
                raise DatasetError(f"{sample.source_path}: resolution {sample.resolution} != {resolution}")
            if sample.intensity is not None and self.intensity_levels and sample.intensity > self.intensity_levels:
                raise LabelError(sample.intensity, range(1, self.intensity_levels + 1))
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "vocabulary", vocabulary)
        object.__setattr__(self, "resolution", resolution)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[FaceSample]:
        return iter(self.samples)

    def __getitem__(self, index: int) -> FaceSample:
        return self.samples[index]

    @property
    def subjects(self) -> List[str]:
        return sorted({s.subject_id for s in self.samples})

    def by_subject(self) -> Dict[str, List[FaceSample]]:
        groups: Dict[str, List[FaceSample]] = {}
        for sample in self.samples:
            groups.setdefault(sample.subject_id, []).append(sample)
        return groups

    def subset(self, keep: Callable[[FaceSample], bool]) -> "Dataset":
        return self.with_samples([s for s in self.samples if keep(s)])

    def with_samples(self, samples: Sequence[FaceSample]) -> "Dataset":
        return Dataset(tuple(samples), self.vocabulary, self.intensity_levels, self.resolution,
                       dict(self.metadata))
