import json

import numpy as np
import pytest
from PIL import Image
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from expression_gan.data import (DEFAULT_EXPRESSIONS, NUM_LANDMARKS, Dataset, FaceSample, LandmarkSet, SplitPolicy,
                                 collate_pairs, ingest_raw_directory, intensity_one_hot, load_manifest,
                                 make_training_pairs, one_hot, read_manifest, split, synth_corpus, write_manifest)
from expression_gan.data.synthetic import MARKER_MIN_RESOLUTION, locate_markers, marker_ink
from expression_gan.errors import DatasetError, LabelError, ManifestError
from expression_gan.landmarks import layout
from expression_gan.landmarks.layout import canonical_layout
from expression_gan.utils.images import denormalize, normalize


def _sample(subject="s00", expression="happy", resolution=32, intensity=None, name=None):
    image = np.zeros((resolution, resolution, 3), dtype=np.float32)
    return FaceSample(image=image, landmarks=LandmarkSet(canonical_layout(resolution)), subject_id=subject,
                      expression=expression, intensity=intensity,
                      source_path=name or f"mem://{subject}/{expression}/{intensity}")


def _write_manifest(path, rows, vocabulary=("happy", "sad"), levels=0):
    lines = [json.dumps({"header": True, "vocabulary": list(vocabulary), "intensity_levels": levels})]
    lines += [json.dumps(r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def _png(path, size, color=(128, 64, 32)):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.new("RGB", (size, size), color).save(path)


# Types

def test_landmark_count_has_one_definition():
    assert layout.NUM_LANDMARKS is NUM_LANDMARKS
    assert layout.face_landmarks().shape == (NUM_LANDMARKS, 2)


def test_landmark_set_requires_68_finite_points():
    with pytest.raises(ValueError):
        LandmarkSet(np.zeros((67, 2)))
    with pytest.raises(ValueError):
        LandmarkSet(np.full((68, 2), np.nan))
    assert len(LandmarkSet.from_flat(list(range(136)))) == 68


def test_face_sample_rejects_out_of_bounds_landmarks():
    points = canonical_layout(32)
    points[0] = (40.0, 10.0)
    with pytest.raises(ValueError):
        FaceSample(np.zeros((32, 32, 3)), LandmarkSet(points), "s00", "happy")


def test_dataset_rejects_unknown_expression():
    with pytest.raises(LabelError):
        Dataset((_sample(expression="smirk"),), ("happy", "sad"))


def test_dataset_is_sorted_by_source_path():
    ds = Dataset((_sample(name="b"), _sample(name="a")), ("happy",))
    assert [s.source_path for s in ds] == ["a", "b"]


def test_normalize_round_trip_is_exact():
    pixels = np.arange(256, dtype=np.uint8).reshape(16, 16, 1).repeat(3, axis=2)
    assert np.array_equal(denormalize(normalize(pixels)), pixels)


# Labels

def test_one_hot():
    vocab = list(DEFAULT_EXPRESSIONS)
    assert one_hot("happy", vocab).values.tolist() == [0, 0, 0, 1, 0, 0, 0]
    assert one_hot("angry", vocab).values.tolist() == [1, 0, 0, 0, 0, 0, 0]
    assert one_hot("happy", vocab).values.sum() == 1.0
    with pytest.raises(LabelError) as excinfo:
        one_hot("smirk", vocab)
    assert "surprise" in str(excinfo.value)


def test_intensity_one_hot():
    assert intensity_one_hot(3, 4).values.tolist() == [0, 0, 1, 0]
    with pytest.raises(LabelError):
        intensity_one_hot(5, 4)


# Synthetic corpus

def test_synth_corpus_counts_and_distinct_subjects():
    ds = synth_corpus(2, DEFAULT_EXPRESSIONS, 1, 64, seed=7)
    assert len(ds) == 14
    assert ds.subjects == ["s00", "s01"]
    backgrounds = {tuple(s.image[0, 0]) for s in ds}
    assert len(backgrounds) == 2


def test_synth_corpus_is_deterministic():
    a = synth_corpus(2, DEFAULT_EXPRESSIONS, 1, 64, seed=7)
    b = synth_corpus(2, DEFAULT_EXPRESSIONS, 1, 64, seed=7)
    for sa, sb in zip(a, b):
        assert sa.image.tobytes() == sb.image.tobytes()
        assert sa.landmarks == sb.landmarks


def test_happy_lifts_mouth_corners():
    ds = synth_corpus(1, ("happy", "neutral"), 1, 64, seed=0)
    happy = next(s for s in ds if s.expression == "happy").landmarks.points
    neutral = next(s for s in ds if s.expression == "neutral").landmarks.points
    for corner in (48, 54):
        assert happy[corner, 1] < neutral[corner, 1]


def test_synth_corpus_intensity_levels():
    ds = synth_corpus(1, ("neutral", "surprise"), intensities=4, resolution=32)
    assert ds.intensity_levels == 4
    assert sorted(s.intensity for s in ds if s.expression == "surprise") == [1, 2, 3, 4]
    assert [s.intensity for s in ds if s.expression == "neutral"] == [1]
    gaps = [s.landmarks.points[66, 1] - s.landmarks.points[62, 1]
            for s in sorted(ds, key=lambda s: s.intensity) if s.expression == "surprise"]
    assert all(b > a for a, b in zip(gaps, gaps[1:]))


def test_synth_corpus_preconditions():
    with pytest.raises(DatasetError):
        synth_corpus(0)
    with pytest.raises(DatasetError):
        synth_corpus(1, resolution=16)


def test_marker_ink_centres_are_the_landmarks():
    points = np.array([[10.5, 10.5], [20.3, 30.8], [40.0, 5.25]])
    ink = marker_ink(points, 64)
    assert ink.sum() == pytest.approx(3.0)
    assert np.count_nonzero(ink) <= 12

    clean = np.zeros((64, 64, 3))
    marked = (clean + 1.0) * (1.0 - ink[..., None]) - 1.0
    centres = locate_markers(marked, clean)
    assert np.allclose(centres, points[[2, 0, 1]], atol=1e-9)


def test_overlay_markers_recover_landmarks():
    expressions = ("neutral", "surprise", "disgust")
    marked = synth_corpus(2, expressions, resolution=MARKER_MIN_RESOLUTION, seed=3, overlay_markers=True)
    clean = synth_corpus(2, expressions, resolution=MARKER_MIN_RESOLUTION, seed=3)
    for m, c in zip(marked, clean):
        assert m.landmarks == c.landmarks
        assert not np.array_equal(m.image, c.image)
        centres = locate_markers(m.image, c.image)
        assert len(centres) == 68
        rows, cols = linear_sum_assignment(cdist(m.landmarks.points, centres))
        assert np.linalg.norm(m.landmarks.points[rows] - centres[cols], axis=1).max() < 0.5


def test_overlay_markers_need_high_resolution():
    with pytest.raises(DatasetError):
        synth_corpus(1, ("neutral",), resolution=MARKER_MIN_RESOLUTION // 2, overlay_markers=True)


# Pairs and splits

def test_cross_pairs_count_and_subject_match():
    ds = synth_corpus(2, ("happy", "neutral", "sad"), resolution=32)
    pairs = make_training_pairs(ds, "cross", seed=0)
    assert len(pairs) == 12
    for pair in pairs:
        assert pair.x.subject_id == pair.y.subject_id
        assert pair.x.expression != pair.y.expression
        assert pair.l == pair.y.landmarks
        assert pair.l_e.hot_index == ds.vocabulary.index(pair.y.expression)


def test_from_neutral_pairs():
    ds = synth_corpus(1, DEFAULT_EXPRESSIONS, resolution=32)
    pairs = make_training_pairs(ds, "from_neutral")
    assert len(pairs) == 6
    assert all(p.x.expression == "neutral" for p in pairs)


def test_pair_order_is_seeded():
    ds = synth_corpus(2, ("happy", "neutral", "sad"), resolution=32)
    order = lambda seed: [(p.x.source_path, p.y.source_path) for p in make_training_pairs(ds, "cross", seed)]
    assert order(3) == order(3)
    assert sorted(order(3)) == sorted(order(4))


def test_single_expression_subject_is_skipped(caplog):
    ds = Dataset((_sample("s00", "happy"), _sample("s01", "happy"), _sample("s01", "sad")), ("happy", "sad"))
    pairs = make_training_pairs(ds, "cross")
    assert len(pairs) == 2
    assert "Skipped 1 subject" in caplog.text


def test_from_neutral_names_subjects_without_neutral(caplog):
    ds = Dataset((_sample("s00", "happy"), _sample("s00", "neutral"), _sample("s01", "happy"), _sample("s01", "sad")),
                 ("happy", "neutral", "sad"))
    pairs = make_training_pairs(ds, "from_neutral")
    assert len(pairs) == 1
    assert all(p.x.subject_id == "s00" for p in pairs)
    assert "Subject 's01' has no 'neutral' sample" in caplog.text


def test_subject_holdout_split_is_disjoint_and_seeded():
    ds = synth_corpus(10, ("happy", "neutral"), resolution=32)
    train, test = split(ds, SplitPolicy.subject_holdout(2), seed=1)
    assert len(train.subjects) == 8 and len(test.subjects) == 2
    assert not set(train.subjects) & set(test.subjects)
    again, _ = split(ds, SplitPolicy.subject_holdout(2), seed=1)
    assert again.subjects == train.subjects


def test_sample_fraction_split():
    ds = synth_corpus(6, ("happy", "neutral", "sad"), resolution=32)
    train, test = split(ds, SplitPolicy.sample_fraction(0.33), seed=0)
    assert len(train) + len(test) == len(ds)
    assert {s.source_path for s in train}.isdisjoint(s.source_path for s in test)
    assert sum(s.expression == "happy" for s in test) == 2


@pytest.mark.parametrize("policy", [SplitPolicy.sample_fraction(1.0), SplitPolicy.subject_holdout(5)])
def test_split_preconditions(policy):
    ds = synth_corpus(3, ("happy", "sad"), resolution=32)
    with pytest.raises(DatasetError):
        split(ds, policy)


def test_collate_pairs_shapes(corpus):
    pairs = make_training_pairs(corpus)[:4]
    batch = collate_pairs(pairs)
    assert batch["x"].shape == (4, 3, 32, 32)
    assert batch["y"].shape == (4, 3, 32, 32)
    assert batch["l"].shape == (4, 68, 2)
    assert batch["l_e"].shape == (4, 3)
    assert batch["l_i"] is None


# Manifests

def test_manifest_round_trip(tmp_path, corpus):
    path = write_manifest(corpus, str(tmp_path / "train.jsonl"))
    loaded = load_manifest(path, resolution=32)
    assert len(loaded) == len(corpus)
    assert loaded.vocabulary == corpus.vocabulary
    original = sorted(corpus, key=lambda s: (s.subject_id, s.expression))
    reloaded = sorted(loaded, key=lambda s: (s.subject_id, s.expression))
    for a, b in zip(original, reloaded):
        assert np.array_equal(denormalize(a.image), denormalize(b.image))
        assert np.allclose(a.landmarks.points, b.landmarks.points)


def test_manifest_rescales_landmarks(tmp_path):
    _png(tmp_path / "img" / "a.png", 512)
    points = canonical_layout(512)
    points[0] = (512.0, 256.0)
    path = _write_manifest(tmp_path / "m.jsonl", [
        {"image": "img/a.png", "subject": "s1", "expression": "happy", "intensity": None,
         "landmarks": points.reshape(-1).tolist()},
    ])
    ds = load_manifest(path, resolution=256)
    assert len(ds) == 1
    assert tuple(ds[0].landmarks.points[0]) == (256.0, 128.0)


def test_manifest_reports_row_of_short_landmark_list(tmp_path):
    _png(tmp_path / "a.png", 32)
    good = canonical_layout(32).reshape(-1).tolist()
    path = _write_manifest(tmp_path / "m.jsonl", [
        {"image": "a.png", "subject": "s1", "expression": "happy", "landmarks": good},
        {"image": "a.png", "subject": "s1", "expression": "sad", "landmarks": good[:134]},
    ])
    with pytest.raises(ManifestError) as excinfo:
        read_manifest(path)
    assert excinfo.value.row == 3
    assert "67" in str(excinfo.value)


def test_manifest_unknown_expression(tmp_path):
    path = _write_manifest(tmp_path / "m.jsonl", [
        {"image": "a.png", "subject": "s1", "expression": "smirk",
         "landmarks": canonical_layout(32).reshape(-1).tolist()},
    ])
    with pytest.raises(ManifestError) as excinfo:
        read_manifest(path)
    assert excinfo.value.row == 2
    assert "smirk" in str(excinfo.value)


def test_manifest_malformed_json_and_missing_file(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"header": true, "vocabulary": ["happy"]}\n{oops\n')
    with pytest.raises(ManifestError) as excinfo:
        read_manifest(str(bad))
    assert excinfo.value.row == 2
    with pytest.raises(ManifestError):
        read_manifest(str(tmp_path / "missing.jsonl"))


def test_ingest_raw_directory(tmp_path):
    raw = tmp_path / "raw"
    for subject in ("alice", "bob"):
        for stem in ("happy", "sad_2"):
            _png(raw / subject / f"{stem}.png", 64)
            (raw / subject / f"{stem}.landmarks.json").write_text(
                json.dumps(canonical_layout(64).reshape(-1).tolist()))
    ds = ingest_raw_directory(str(raw), resolution=32)
    assert len(ds) == 4
    assert ds.vocabulary == ("happy", "sad")
    assert ds.intensity_levels == 2
    assert np.allclose(ds[0].landmarks.points, canonical_layout(32))


def test_ingest_raw_directory_missing_landmarks(tmp_path):
    _png(tmp_path / "raw" / "alice" / "happy.png", 32)
    with pytest.raises(ManifestError):
        ingest_raw_directory(str(tmp_path / "raw"), resolution=32)
