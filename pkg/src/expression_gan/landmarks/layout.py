"""
The standard 68-point facial landmark layout.

Index groups (0-based): jaw 0-16, right brow 17-21, left brow 22-26, nose bridge
27-30, nostrils 31-35, right eye 36-41, left eye 42-47, outer lip 48-59, inner lip
60-67. "Right"/"left" are from the subject's point of view, so the right brow sits
on the image's left.

Positions are produced from a small parametric face model in normalised [0, 1]
units; the synthetic corpus draws faces from the same model so its landmarks are
exact.
"""

from dataclasses import dataclass, replace
from typing import Dict

import numpy as np

from ..data.types import NUM_LANDMARKS

JAW = range(0, 17)
RIGHT_BROW = range(17, 22)
LEFT_BROW = range(22, 27)
NOSE_BRIDGE = range(27, 31)
NOSTRILS = range(31, 36)
RIGHT_EYE = range(36, 42)
LEFT_EYE = range(42, 48)
OUTER_LIP = range(48, 60)
INNER_LIP = range(60, 68)

GROUPS: Dict[str, range] = {
    "jaw": JAW,
    "right_brow": RIGHT_BROW,
    "left_brow": LEFT_BROW,
    "nose_bridge": NOSE_BRIDGE,
    "nostrils": NOSTRILS,
    "right_eye": RIGHT_EYE,
    "left_eye": LEFT_EYE,
    "outer_lip": OUTER_LIP,
    "inner_lip": INNER_LIP,
}

MOUTH_CORNERS = (48, 54)
INNER_LIP_GAP = (62, 66)


@dataclass(frozen=True)
class FaceGeometry:
    """Per-subject face proportions in normalised units."""

    cx: float = 0.5
    cy: float = 0.52
    rx: float = 0.32
    ry: float = 0.39
    eye_dx: float = 0.13
    eye_rx: float = 0.065
    eye_ry: float = 0.032
    brow_half: float = 0.07
    nose_w: float = 0.05
    mouth_half: float = 0.11
    lip: float = 0.025


@dataclass(frozen=True)
class ExpressionShape:
    """Deformation parameters of one expression at full intensity.

    mouth_curve > 0 lifts the mouth corners; brow_angle > 0 lowers the inner brow
    ends; eye_open is a multiplier on eye height.
    """

    mouth_curve: float = 0.0
    mouth_open: float = 0.0
    brow_angle: float = 0.0
    brow_raise: float = 0.0
    eye_open: float = 1.0

    def scaled(self, amount: float) -> "ExpressionShape":
        """Interpolate between neutral (0) and this shape (1)."""
        return replace(
            self,
            mouth_curve=self.mouth_curve * amount,
            mouth_open=self.mouth_open * amount,
            brow_angle=self.brow_angle * amount,
            brow_raise=self.brow_raise * amount,
            eye_open=1.0 + (self.eye_open - 1.0) * amount,
        )


NEUTRAL = ExpressionShape()

# Lip sample positions along the mouth width, -1 is the image-left corner.
_UPPER_OUTER_U = (-1.0, -0.6, -0.25, 0.0, 0.25, 0.6, 1.0)   # 48-54
_LOWER_OUTER_U = (0.6, 0.25, 0.0, -0.25, -0.6)              # 55-59
_UPPER_INNER_U = (-0.8, -0.35, 0.0, 0.35, 0.8)              # 60-64
_LOWER_INNER_U = (0.35, 0.0, -0.35)                         # 65-67


def mouth_gap(shape: ExpressionShape) -> float:
    """Inner-lip opening between points 62 and 66, normalised units."""
    return 0.012 + 0.07 * max(shape.mouth_open, 0.0)


def face_landmarks(geometry: FaceGeometry = FaceGeometry(), shape: ExpressionShape = NEUTRAL) -> np.ndarray:
    """
    Compute the 68 landmark positions of a parametric face.

    Args:
        geometry: Subject proportions.
        shape: Expression deformation (already scaled by intensity).

    Returns:
        (68, 2) float64 array of (p, q) in normalised [0, 1] units.
    """
    g, s = geometry, shape
    pts = np.zeros((NUM_LANDMARKS, 2), dtype=np.float64)
    eye_y = g.cy - 0.26 * g.ry
    brow_y = g.cy - 0.47 * g.ry - 0.03 * s.brow_raise
    mouth_y = g.cy + 0.47 * g.ry
    jaw_drop = 0.03 * max(s.mouth_open, 0.0)

    for k, i in enumerate(JAW):
        theta = (np.pi + 0.2) - k * (np.pi + 0.4) / 16
        drop = jaw_drop * max(np.sin(theta), 0.0)
        pts[i] = (g.cx + g.rx * np.cos(theta), g.cy + g.ry * np.sin(theta) + drop)

    for brow, side in ((RIGHT_BROW, -1.0), (LEFT_BROW, 1.0)):
        bx = g.cx + side * g.eye_dx
        for k, i in enumerate(brow):
            # u runs outer -> inner on the right brow, inner -> outer on the left
            u = -1.0 + k / 2.0
            x = bx + u * g.brow_half
            inner = (1.0 + u) / 2.0 if side < 0 else (1.0 - u) / 2.0
            y = brow_y - 0.015 * (1.0 - u * u) + 0.03 * s.brow_angle * inner
            pts[i] = (x, y)

    nose_top = eye_y
    nose_bottom = g.cy + 0.2 * g.ry
    for k, i in enumerate(NOSE_BRIDGE):
        pts[i] = (g.cx, nose_top + (nose_bottom - nose_top) * 0.8 * k / 3.0)
    for k, i in enumerate(NOSTRILS):
        u = -1.0 + k / 2.0
        pts[i] = (g.cx + u * g.nose_w, nose_bottom + 0.012 * (1.0 - abs(u)))

    eh = g.eye_ry * s.eye_open
    for eye, side in ((RIGHT_EYE, -1.0), (LEFT_EYE, 1.0)):
        ex = g.cx + side * g.eye_dx
        offsets = ((-1.0, 0.0), (-1 / 3, -1.0), (1 / 3, -1.0), (1.0, 0.0), (1 / 3, 1.0), (-1 / 3, 1.0))
        for (du, dv), i in zip(offsets, eye):
            pts[i] = (ex + du * g.eye_rx, eye_y + dv * eh)

    width = g.mouth_half * (1.0 + 0.12 * s.mouth_curve)
    lift = 0.04 * s.mouth_curve
    gap = mouth_gap(s)

    def base(u: float) -> float:
        return mouth_y - lift * u * u

    def span(u: float) -> float:
        return max(1.0 - u * u, 0.0)

    for u, i in zip(_UPPER_OUTER_U, range(48, 55)):
        pts[i] = (g.cx + u * width, base(u) - gap / 2 * span(u) - g.lip * np.sqrt(span(u)))
    for u, i in zip(_LOWER_OUTER_U, range(55, 60)):
        pts[i] = (g.cx + u * width, base(u) + gap / 2 * span(u) + g.lip * np.sqrt(span(u)))
    for u, i in zip(_UPPER_INNER_U, range(60, 65)):
        offset = 0.0 if abs(u) > 0.5 else gap / 2 * span(u)
        pts[i] = (g.cx + u * width, base(u) - offset)
    for u, i in zip(_LOWER_INNER_U, range(65, 68)):
        pts[i] = (g.cx + u * width, base(u) + gap / 2 * span(u))
    return pts


def canonical_layout(resolution: int) -> np.ndarray:
    """Mean 68-point template in pixel coordinates for a square image."""
    return face_landmarks() * float(resolution)
