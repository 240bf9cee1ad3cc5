"""
Manifest reading and writing.

A manifest is a JSON-lines file. Line 1 is a header object declaring the ordered
expression vocabulary; every following line describes one image:

    {"header": true, "vocabulary": ["angry", ...], "intensity_levels": 4}
    {"image": "faces/s01/happy.png", "subject": "s01", "expression": "happy",
     "intensity": null, "landmarks": [p_1, q_1, ..., p_68, q_68]}

Image paths are resolved relative to the manifest's directory; landmark
coordinates are in source-image pixels.
"""

import os
import re
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import jsonschema
import numpy as np

from ..errors import LabelError, ManifestError
from ..utils.images import load_image, save_png
from .types import NUM_LANDMARKS, Dataset, FaceSample, LandmarkSet

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")
LANDMARK_SUFFIX = ".landmarks.json"

HEADER_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "required": ["header", "vocabulary"],
    "properties": {
        "header": {"const": True},
        "vocabulary": {"type": "array", "items": {"type": "string"}, "minItems": 1, "uniqueItems": True},
        "intensity_levels": {"type": "integer", "minimum": 0},
    },
}

ROW_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "required": ["image", "subject", "expression", "landmarks"],
    "properties": {
        "image": {"type": "string", "minLength": 1},
        "subject": {"type": "string", "minLength": 1},
        "expression": {"type": "string"},
        "intensity": {"type": ["integer", "null"], "minimum": 1},
        "landmarks": {"type": "array", "items": {"type": "number"}},
    },
}


def _validate(instance: Any, schema: Dict[str, Any], path: str, row: int) -> None:
    try:
        jsonschema.validate(instance, schema)
    except jsonschema.ValidationError as e:
        field = ".".join(str(p) for p in e.absolute_path) or "row"
        raise ManifestError(f"{field}: {e.message}", row=row, path=path) from e


def read_manifest(path: str) -> Tuple[Dict[str, Any], List[Tuple[int, Dict[str, Any]]]]:
    """
    Parse and validate a manifest without loading images.

    Args:
        path: Manifest file path.

    Returns:
        (header, [(row_number, row), ...]) with 1-based row numbers.

    Raises:
        ManifestError: for a missing file, malformed JSON, schema violations,
            wrong landmark counts or unknown expressions.
    """
    if not os.path.isfile(path):
        raise ManifestError("manifest file not found", path=path)

    header: Optional[Dict[str, Any]] = None
    rows: List[Tuple[int, Dict[str, Any]]] = []
    with open(path, "r") as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestError(f"malformed JSON ({e.msg})", row=number, path=path) from e
            if header is None:
                _validate(record, HEADER_SCHEMA, path, number)
                header = record
                continue
            _validate(record, ROW_SCHEMA, path, number)
            if len(record["landmarks"]) != 2 * NUM_LANDMARKS:
                raise ManifestError(
                    f"expected {NUM_LANDMARKS} landmarks, got {len(record['landmarks']) / 2:g}",
                    row=number, path=path)
            if record["expression"] not in header["vocabulary"]:
                raise ManifestError(str(LabelError(record["expression"], header["vocabulary"])),
                                    row=number, path=path)
            levels = header.get("intensity_levels", 0)
            intensity = record.get("intensity")
            if intensity is not None and levels and intensity > levels:
                raise ManifestError(f"intensity {intensity} exceeds {levels} levels", row=number, path=path)
            rows.append((number, record))

    if header is None:
        raise ManifestError("manifest is empty (missing header line)", path=path)
    return header, rows


def load_manifest(path: str, resolution: int = 256, workers: int = 4) -> Dataset:
    """
    Load a manifest into a Dataset.

    Images are resized to resolution x resolution and normalised to [-1, 1];
    landmarks are rescaled by the same horizontal and vertical factors.

    Args:
        path: Manifest file path.
        resolution: Target image side length.
        workers: Threads used to decode images.

    Returns:
        Dataset ordered by source path.
    """
    header, rows = read_manifest(path)
    base_dir = os.path.dirname(os.path.abspath(path))

    def load_row(item: Tuple[int, Dict[str, Any]]) -> FaceSample:
        number, record = item
        image_path = os.path.normpath(os.path.join(base_dir, record["image"]))
        try:
            image, (src_w, src_h) = load_image(image_path, resolution)
        except (OSError, ValueError) as e:
            raise ManifestError(f"cannot read image {image_path}: {e}", row=number, path=path) from e
        landmarks = LandmarkSet.from_flat(record["landmarks"])
        if not landmarks.in_bounds(src_w, src_h):
            raise ManifestError(f"landmarks fall outside the {src_w}x{src_h} image", row=number, path=path)
        landmarks = landmarks.scaled(resolution / src_w, resolution / src_h)
        return FaceSample(image=image, landmarks=landmarks, subject_id=record["subject"],
                          expression=record["expression"], intensity=record.get("intensity"),
                          source_path=image_path)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        samples = list(pool.map(load_row, rows))

    logger.info(f"Loaded {len(samples)} samples from {path} at {resolution}x{resolution}")
    return Dataset(tuple(samples), tuple(header["vocabulary"]), header.get("intensity_levels", 0) or 0,
                   resolution, {"manifest": os.path.abspath(path)})


def write_manifest(dataset: Dataset, path: str, image_dir: Optional[str] = None) -> str:
    """
    Write a dataset's images as PNGs and its manifest as JSON lines.

    Args:
        dataset: Dataset to export.
        path: Manifest file path.
        image_dir: Directory for PNGs; defaults to "images" next to the manifest.

    Returns:
        The manifest path.
    """
    base_dir = os.path.dirname(os.path.abspath(path))
    image_dir = image_dir or os.path.join(base_dir, "images")
    os.makedirs(base_dir, exist_ok=True)

    lines = [json.dumps({"header": True, "vocabulary": list(dataset.vocabulary),
                         "intensity_levels": dataset.intensity_levels})]
    for index, sample in enumerate(dataset):
        stem = sample.expression if sample.intensity is None else f"{sample.expression}_{sample.intensity}"
        image_path = os.path.join(image_dir, sample.subject_id, f"{stem}_{index:05d}.png")
        save_png(sample.image, image_path)
        lines.append(json.dumps({
            "image": os.path.relpath(image_path, base_dir),
            "subject": sample.subject_id,
            "expression": sample.expression,
            "intensity": sample.intensity,
            "landmarks": sample.landmarks.to_flat(),
        }))

    tmp = f"{path}.tmp"
    with open(tmp, "w") as f:
        f.write("\n".join(lines) + "\n")
    os.replace(tmp, path)
    logger.info(f"Wrote manifest with {len(dataset)} rows to {path}")
    return path


_RAW_NAME = re.compile(r"^(?P<expression>[A-Za-z][A-Za-z0-9-]*?)(?:_(?P<level>\d+))?$")


def ingest_raw_directory(raw_dir: str, resolution: int = 256,
                         vocabulary: Optional[Sequence[str]] = None, workers: int = 4) -> Dataset:
    """
    Build a Dataset from ``<raw>/<subject>/<expression>[_<level>].<png|jpg>`` files.

    Each image needs a sibling ``<stem>.landmarks.json`` holding 136 reals (or an
    object with a "landmarks" key). The vocabulary defaults to the sorted set of
    expressions found.

    Raises:
        ManifestError: for unparseable names, missing landmark files or bad counts.
    """
    if not os.path.isdir(raw_dir):
        raise ManifestError("raw directory not found", path=raw_dir)

    entries: List[Tuple[str, str, str, Optional[int], str]] = []
    for subject in sorted(os.listdir(raw_dir)):
        subject_dir = os.path.join(raw_dir, subject)
        if not os.path.isdir(subject_dir):
            continue
        for name in sorted(os.listdir(subject_dir)):
            stem, ext = os.path.splitext(name)
            if ext.lower() not in IMAGE_EXTENSIONS:
                continue
            match = _RAW_NAME.match(stem)
            if match is None:
                raise ManifestError(f"cannot parse expression from file name '{name}'", path=subject_dir)
            level = match.group("level")
            entries.append((os.path.join(subject_dir, name), subject, match.group("expression"),
                            int(level) if level else None, os.path.join(subject_dir, stem + LANDMARK_SUFFIX)))

    if not entries:
        raise ManifestError("no images found", path=raw_dir)
    found = sorted({e[2] for e in entries})
    vocabulary = list(vocabulary) if vocabulary else found
    for _, _, expression, _, _ in entries:
        if expression not in vocabulary:
            raise LabelError(expression, vocabulary)
    levels = max((e[3] or 0) for e in entries)

    def load_entry(entry: Tuple[str, str, str, Optional[int], str]) -> FaceSample:
        image_path, subject, expression, level, landmark_path = entry
        if not os.path.isfile(landmark_path):
            raise ManifestError("missing landmark file", path=landmark_path)
        with open(landmark_path) as f:
            data = json.load(f)
        values = data.get("landmarks") if isinstance(data, dict) else data
        if not isinstance(values, list) or len(values) != 2 * NUM_LANDMARKS:
            raise ManifestError(f"expected {2 * NUM_LANDMARKS} landmark values", path=landmark_path)
        image, (src_w, src_h) = load_image(image_path, resolution)
        landmarks = LandmarkSet(np.asarray(values, dtype=np.float64).reshape(NUM_LANDMARKS, 2))
        if not landmarks.in_bounds(src_w, src_h):
            raise ManifestError(f"landmarks fall outside the {src_w}x{src_h} image", path=landmark_path)
        return FaceSample(image=image, landmarks=landmarks.scaled(resolution / src_w, resolution / src_h),
                          subject_id=subject, expression=expression, intensity=level, source_path=image_path)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        samples = list(pool.map(load_entry, entries))
    logger.info(f"Ingested {len(samples)} images of {len({e[1] for e in entries})} subjects from {raw_dir}")
    return Dataset(tuple(samples), tuple(vocabulary), levels, resolution, {"raw_dir": os.path.abspath(raw_dir)})
