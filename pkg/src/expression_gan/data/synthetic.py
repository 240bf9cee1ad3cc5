"""
Procedural cartoon-face corpus with exact landmark ground truth.

Each subject gets randomised proportions and colours; each expression is a
parametric deformation of the mouth, brows and eyes, scaled by intensity. Faces
are drawn with PIL at a supersampled resolution from the same landmark model
(landmarks.layout.face_landmarks), so the stored LandmarkSets are the analytic
keypoint positions of what is drawn.
"""

import zlib
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage

from ..errors import DatasetError
from ..landmarks.layout import (ExpressionShape, FaceGeometry, INNER_LIP, LEFT_BROW, LEFT_EYE, NOSE_BRIDGE,
                                NOSTRILS, OUTER_LIP, RIGHT_BROW, RIGHT_EYE, face_landmarks)
from ..utils.images import normalize
from .types import Dataset, FaceSample, LandmarkSet

logger = logging.getLogger(__name__)

DEFAULT_EXPRESSIONS: Tuple[str, ...] = ("angry", "disgust", "fear", "happy", "neutral", "sad", "surprise")

EXPRESSION_SHAPES: Dict[str, ExpressionShape] = {
    "neutral": ExpressionShape(),
    "happy": ExpressionShape(mouth_curve=1.0, mouth_open=0.3, brow_raise=0.1, eye_open=0.9),
    "sad": ExpressionShape(mouth_curve=-0.8, brow_angle=-0.6, eye_open=0.85),
    "angry": ExpressionShape(mouth_curve=-0.4, mouth_open=0.1, brow_angle=1.0, brow_raise=-0.3, eye_open=0.8),
    "surprise": ExpressionShape(mouth_open=1.0, brow_raise=1.0, eye_open=1.3),
    "fear": ExpressionShape(mouth_curve=-0.3, mouth_open=0.6, brow_angle=-0.8, brow_raise=0.7, eye_open=1.2),
    "disgust": ExpressionShape(mouth_curve=-0.6, mouth_open=0.2, brow_angle=0.6, brow_raise=-0.2, eye_open=0.7),
}

SUPERSAMPLE = 4
# the closest landmark pairs are ~0.0105 image widths apart; markers stay separate from here up
MARKER_MIN_RESOLUTION = 512


@dataclass(frozen=True)
class SubjectStyle:
    """Everything that distinguishes one synthetic subject."""

    subject_id: str
    geometry: FaceGeometry
    background: Tuple[int, int, int]
    skin: Tuple[int, int, int]
    iris: Tuple[int, int, int]
    lips: Tuple[int, int, int]
    brows: Tuple[int, int, int]


def expression_shape(name: str) -> ExpressionShape:
    """Deformation for a named expression; unknown names get a stable random shape."""
    if name in EXPRESSION_SHAPES:
        return EXPRESSION_SHAPES[name]
    rng = np.random.default_rng(zlib.crc32(name.encode("utf-8")))
    return ExpressionShape(
        mouth_curve=float(rng.uniform(-1, 1)),
        mouth_open=float(rng.uniform(0, 1)),
        brow_angle=float(rng.uniform(-1, 1)),
        brow_raise=float(rng.uniform(-0.5, 1)),
        eye_open=float(rng.uniform(0.7, 1.3)),
    )


def _color(rng: np.random.Generator, low: int = 20, high: int = 220) -> Tuple[int, int, int]:
    return tuple(int(v) for v in rng.integers(low, high, size=3))


def make_subject(index: int, seed: int) -> SubjectStyle:
    """Draw a subject's style from a stream keyed by (seed, index)."""
    rng = np.random.default_rng([seed, index])
    geometry = FaceGeometry(
        cx=float(rng.uniform(0.48, 0.52)),
        cy=float(rng.uniform(0.50, 0.54)),
        rx=float(rng.uniform(0.29, 0.34)),
        ry=float(rng.uniform(0.36, 0.40)),
        eye_dx=float(rng.uniform(0.115, 0.14)),
        eye_rx=float(rng.uniform(0.055, 0.07)),
        eye_ry=float(rng.uniform(0.028, 0.036)),
        brow_half=float(rng.uniform(0.06, 0.075)),
        nose_w=float(rng.uniform(0.04, 0.055)),
        mouth_half=float(rng.uniform(0.09, 0.12)),
        lip=float(rng.uniform(0.02, 0.028)),
    )
    return SubjectStyle(
        subject_id=f"s{index:02d}",
        geometry=geometry,
        background=_color(rng),
        skin=_color(rng, 90, 230),
        iris=_color(rng, 10, 150),
        lips=_color(rng, 60, 200),
        brows=_color(rng, 10, 120),
    )


def _head_outline(geometry: FaceGeometry, jaw: np.ndarray, n_arc: int = 24) -> List[Tuple[float, float]]:
    start, stop = -0.2, -np.pi - 0.2
    arc = [(geometry.cx + geometry.rx * np.cos(t), geometry.cy + geometry.ry * 1.05 * np.sin(t))
           for t in np.linspace(start, stop, n_arc)[1:-1]]
    return [tuple(p) for p in jaw] + arc


def marker_ink(points: np.ndarray, resolution: int) -> np.ndarray:
    """
    Coverage of the overlay markers, one bilinear splat of unit mass per landmark.

    The ink-weighted centre of each splat is exactly its landmark, with pixel
    centres at (i + 0.5, j + 0.5).
    """
    ink = np.zeros((resolution, resolution), dtype=np.float64)
    for p, q in np.asarray(points, dtype=np.float64):
        col, row = int(np.floor(p - 0.5)), int(np.floor(q - 0.5))
        fx, fy = p - 0.5 - col, q - 0.5 - row
        for dr, wy in ((0, 1.0 - fy), (1, fy)):
            for dc, wx in ((0, 1.0 - fx), (1, fx)):
                r, c = row + dr, col + dc
                if 0 <= r < resolution and 0 <= c < resolution:
                    ink[r, c] += wy * wx
    return np.clip(ink, 0.0, 1.0)


def locate_markers(marked: np.ndarray, clean: np.ndarray, threshold: float = 1e-4) -> np.ndarray:
    """
    Find the overlay markers of a synthetic face.

    Ink is recovered per pixel from how much darker the marked render is than the
    same face rendered without markers. Connected inked regions (8-neighbourhood)
    are reduced to their ink-weighted centres.

    Args:
        marked: HxWx3 render with overlay_markers=True, in [-1, 1].
        clean: The same face rendered without markers.
        threshold: Minimum ink for a pixel to belong to a marker.

    Returns:
        (n, 2) marker centres as (p, q) pixel coordinates, one per region.
    """
    marked = np.asarray(marked, dtype=np.float64)
    clean = np.asarray(clean, dtype=np.float64)
    if marked.shape != clean.shape:
        raise ValueError(f"image shapes differ: {marked.shape} vs {clean.shape}")
    ink = np.clip(1.0 - (marked + 1.0) / np.maximum(clean + 1.0, 1e-6), 0.0, 1.0).mean(axis=2)
    labels, n_regions = ndimage.label(ink > threshold, structure=np.ones((3, 3), dtype=bool))
    if n_regions == 0:
        return np.zeros((0, 2), dtype=np.float64)
    rows_cols = np.array(ndimage.center_of_mass(ink, labels, np.arange(1, n_regions + 1)), dtype=np.float64)
    return rows_cols.reshape(-1, 2)[:, ::-1] + 0.5


def render_face(style: SubjectStyle, shape: ExpressionShape, resolution: int,
                overlay_markers: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw one face.

    Args:
        style: Subject style.
        shape: Expression deformation, already scaled by intensity.
        resolution: Output side length.
        overlay_markers: Also darken a bilinear splat on every landmark (see marker_ink).
            Needs resolution >= MARKER_MIN_RESOLUTION.

    Returns:
        (HxWx3 float32 image in [-1, 1], (68, 2) landmark pixel coordinates)
    """
    if overlay_markers and resolution < MARKER_MIN_RESOLUTION:
        raise DatasetError(f"overlay markers need resolution >= {MARKER_MIN_RESOLUTION}, got {resolution}")
    size = resolution * SUPERSAMPLE
    unit = face_landmarks(style.geometry, shape)
    # PIL addresses pixel centres at integer coordinates
    pts = unit * size - 0.5

    canvas = Image.new("RGB", (size, size), style.background)
    draw = ImageDraw.Draw(canvas)

    def poly(indices) -> List[Tuple[float, float]]:
        return [tuple(pts[i]) for i in indices]

    head = np.asarray(_head_outline(style.geometry, unit[:17])) * size - 0.5
    draw.polygon([tuple(p) for p in head], fill=style.skin)

    stroke = max(1, int(round(0.012 * size)))
    for brow in (RIGHT_BROW, LEFT_BROW):
        draw.line(poly(brow), fill=style.brows, width=stroke)

    shade = tuple(int(c * 0.7) for c in style.skin)
    draw.line(poly(NOSE_BRIDGE), fill=shade, width=max(1, stroke // 2))
    draw.line(poly(NOSTRILS), fill=shade, width=max(1, stroke // 2))

    for eye in (RIGHT_EYE, LEFT_EYE):
        outline = poly(eye)
        draw.polygon(outline, fill=(245, 245, 240))
        center = pts[list(eye)].mean(axis=0)
        r = 0.4 * style.geometry.eye_ry * size * min(shape.eye_open, 1.0)
        draw.ellipse([center[0] - r, center[1] - r, center[0] + r, center[1] + r], fill=style.iris)

    draw.polygon(poly(OUTER_LIP), fill=style.lips)
    draw.polygon(poly(INNER_LIP), fill=(40, 18, 22))

    small = canvas.resize((resolution, resolution), Image.BOX)
    image = normalize(np.asarray(small, dtype=np.uint8))
    points = unit * resolution
    if overlay_markers:
        # blend towards black in float so the ink survives exactly
        ink = marker_ink(points, resolution)[..., None]
        image = ((image + 1.0) * (1.0 - ink) - 1.0).astype(np.float32)
    return image, points


def synth_corpus(n_subjects: int, expressions: Sequence[str] = DEFAULT_EXPRESSIONS, intensities: int = 1,
                 resolution: int = 64, seed: int = 0, overlay_markers: bool = False) -> Dataset:
    """
    Render a deterministic synthetic corpus.

    With intensities > 1, every non-neutral expression is rendered at levels
    1..intensities (deformation scaled by level / intensities) and the neutral face
    once at level 1.

    Args:
        n_subjects: Number of subjects (>= 1).
        expressions: Ordered expression vocabulary.
        intensities: Number of intensity levels (>= 1).
        resolution: Image side length (>= 32).
        seed: Random seed for subject styles.
        overlay_markers: Draw landmark markers (for ground-truth checks; see locate_markers).
            Needs resolution >= MARKER_MIN_RESOLUTION.

    Returns:
        Dataset of n_subjects x (expressions x levels) samples.
    """
    if n_subjects < 1:
        raise DatasetError("synth_corpus needs at least one subject")
    if resolution < 32:
        raise DatasetError(f"resolution must be >= 32, got {resolution}")
    if intensities < 1:
        raise DatasetError("intensities must be >= 1")
    if not expressions:
        raise DatasetError("expression vocabulary is empty")

    samples: List[FaceSample] = []
    for index in range(n_subjects):
        style = make_subject(index, seed)
        for expression in expressions:
            if intensities == 1:
                levels: List[Optional[int]] = [None]
            elif expression == "neutral":
                levels = [1]
            else:
                levels = list(range(1, intensities + 1))
            for level in levels:
                amount = 1.0 if level is None or expression == "neutral" else level / intensities
                image, points = render_face(style, expression_shape(expression).scaled(amount), resolution,
                                            overlay_markers=overlay_markers)
                tag = expression if level is None else f"{expression}_{level}"
                samples.append(FaceSample(
                    image=image,
                    landmarks=LandmarkSet(points),
                    subject_id=style.subject_id,
                    expression=expression,
                    intensity=level,
                    source_path=f"synthetic://seed{seed}/{style.subject_id}/{tag}",
                ))

    logger.info(f"Rendered {len(samples)} synthetic faces ({n_subjects} subjects, {resolution}x{resolution})")
    return Dataset(tuple(samples), tuple(expressions), intensities if intensities > 1 else 0, resolution,
                   {"synthetic_seed": str(seed)})
