# Landmark layout and landmark-image codec
from .layout import GROUPS, INNER_LIP_GAP, MOUTH_CORNERS, canonical_layout, face_landmarks
from .codec import (LandmarkImage, RenderConfig, extract_landmarks, landmark_distance, locate_landmarks,
                    render_landmark_image, render_tensor)

__all__ = ['GROUPS', 'INNER_LIP_GAP', 'MOUTH_CORNERS', 'canonical_layout', 'face_landmarks',
           'LandmarkImage', 'RenderConfig', 'extract_landmarks', 'landmark_distance', 'locate_landmarks',
           'render_landmark_image', 'render_tensor']
