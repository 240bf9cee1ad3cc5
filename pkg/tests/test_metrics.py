import json
import math

import numpy as np
import pytest
import torch

from expression_gan.checkpoint import TrainState
from expression_gan.data import synth_corpus
from expression_gan.errors import DatasetError, EmbedderNotFrozenError
from expression_gan.identity import IdentityEmbedder
from expression_gan.metrics import (MODES, AccuracyTable, ExpressionClassifier, MetricsReport, augment_to_count,
                                    augmentation_experiment, evaluate_model, gaussian_window, inception_score,
                                    inception_score_from_probabilities, lpips_like, psnr, score_images, ssim,
                                    train_classifier, traditional_augment)
from conftest import TINY_EXPRESSIONS


class UniformClassifier:
    def __init__(self, k=3):
        self.k = k

    def predict_proba(self, images):
        return np.full((len(images), self.k), 1.0 / self.k)


def _naive_ssim(a, b, data_range=255.0):
    window = gaussian_window()
    c1, c2 = (0.01 * data_range) ** 2, (0.03 * data_range) ** 2
    values = []
    for i in range(a.shape[0] - 10):
        for j in range(a.shape[1] - 10):
            pa, pb = a[i:i + 11, j:j + 11], b[i:i + 11, j:j + 11]
            mu_a, mu_b = (window * pa).sum(), (window * pb).sum()
            var_a = (window * (pa - mu_a) ** 2).sum()
            var_b = (window * (pb - mu_b) ** 2).sum()
            cov = (window * (pa - mu_a) * (pb - mu_b)).sum()
            values.append((2 * mu_a * mu_b + c1) * (2 * cov + c2)
                          / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)))
    return float(np.mean(values))


def _naive_psnr(a, b, peak=255.0):
    total = 0.0
    for u, v in zip(a.ravel().tolist(), b.ravel().tolist()):
        total += (u - v) ** 2
    return 20 * math.log10(peak) - 10 * math.log10(total / a.size)


# PSNR / SSIM

def test_psnr_examples():
    a = np.zeros((8, 8, 3))
    assert psnr(a, a) == math.inf
    assert psnr(a, np.ones_like(a)) == pytest.approx(10 * math.log10(255.0 ** 2), rel=1e-9)
    assert psnr(a, np.full_like(a, 255.0)) == pytest.approx(0.0, abs=1e-9)
    assert psnr(a, np.full_like(a, 0.5), peak=1.0) == pytest.approx(10 * math.log10(4.0))


def test_psnr_rejects_bad_input():
    with pytest.raises(ValueError):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))
    with pytest.raises(ValueError):
        psnr(np.zeros((4, 4)), np.zeros((4, 4)), peak=0.0)


def test_gaussian_window():
    window = gaussian_window()
    assert window.shape == (11, 11)
    assert window.sum() == pytest.approx(1.0)
    assert np.allclose(window, window.T)
    assert window.argmax() == 60


def test_ssim_identity_and_naive_agreement():
    rng = np.random.default_rng(0)
    a = rng.uniform(0, 255, (20, 18))
    b = np.clip(a + rng.normal(0, 20, a.shape), 0, 255)
    assert ssim(a, a) == pytest.approx(1.0)
    assert ssim(a, b) == pytest.approx(_naive_ssim(a, b), rel=1e-6)
    assert ssim(a, b) < 1.0
    assert ssim(a, 255.0 - a) < ssim(a, b)


def test_ssim_reference_cases():
    rng = np.random.default_rng(2)
    flat = np.full((16, 16), 0.5)
    assert ssim(flat, flat + rng.uniform(-1e-4, 1e-4, flat.shape), data_range=1.0) > 0.99
    board = (np.indices((16, 16)).sum(axis=0) % 2).astype(np.float64)
    assert ssim(board, 1.0 - board, data_range=1.0) < 0.0


def test_ssim_averages_channels():
    rng = np.random.default_rng(1)
    a = rng.uniform(0, 255, (16, 16, 3))
    b = rng.uniform(0, 255, (16, 16, 3))
    per_channel = [ssim(a[..., c], b[..., c]) for c in range(3)]
    assert ssim(a, b) == pytest.approx(np.mean(per_channel))


def test_ssim_needs_a_full_window():
    with pytest.raises(ValueError):
        ssim(np.zeros((10, 10)), np.zeros((10, 10)))


@pytest.mark.parametrize("seed", range(50))
def test_psnr_and_ssim_match_naive_versions(seed):
    rng = np.random.default_rng(100 + seed)
    shape = (int(rng.integers(11, 20)), int(rng.integers(11, 20)))
    a = rng.uniform(0, 255, shape)
    b = np.clip(a + rng.normal(0, rng.uniform(1, 60), shape), 0, 255)
    assert psnr(a, b) == pytest.approx(_naive_psnr(a, b), abs=1e-6)
    assert ssim(a, b) == pytest.approx(_naive_ssim(a, b), abs=1e-6)


# Inception score

def test_inception_score_extremes():
    eye = np.eye(4)
    assert inception_score_from_probabilities(eye) == pytest.approx(4.0)
    assert inception_score_from_probabilities(np.tile(eye[0], (5, 1))) == pytest.approx(1.0)
    assert inception_score_from_probabilities(np.full((6, 3), 1 / 3)) == pytest.approx(1.0)


def test_inception_score_validates_probabilities():
    with pytest.raises(ValueError):
        inception_score_from_probabilities(np.array([[0.5, 0.6]]))
    with pytest.raises(ValueError):
        inception_score_from_probabilities(np.zeros((0, 3)))


def test_inception_score_accepts_objects_and_callables():
    images = [np.zeros((8, 8, 3))] * 3
    assert inception_score(UniformClassifier(), images) == pytest.approx(1.0)
    assert inception_score(lambda batch: np.eye(3)[: len(batch)], images) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        inception_score(UniformClassifier(), [])


# Perceptual distance

def test_lpips_like_properties(embedder, corpus):
    a, b = corpus[0].image, corpus[4].image
    assert lpips_like(embedder, a, a) == pytest.approx(0.0, abs=1e-12)
    assert lpips_like(embedder, a, b) > 0.0
    assert lpips_like(embedder, a, b) == pytest.approx(lpips_like(embedder, b, a))
    assert lpips_like(embedder, a, b, layers=[0]) <= lpips_like(embedder, a, b) + 1e-12


@pytest.mark.parametrize("offset", [1, 4, 7])
def test_lpips_like_grows_along_a_blend(embedder, corpus, offset):
    for i in range(0, len(corpus), 3):
        a, b = corpus[i].image, corpus[(i + offset) % len(corpus)].image
        distances = [lpips_like(embedder, a, (1 - t) * a + t * b) for t in (0.0, 0.25, 0.5, 1.0)]
        assert distances[0] == pytest.approx(0.0, abs=1e-12)
        assert all(later > earlier for earlier, later in zip(distances, distances[1:])), distances


def test_lpips_like_requires_frozen_network(corpus):
    with pytest.raises(EmbedderNotFrozenError):
        lpips_like(IdentityEmbedder(8), corpus[0].image, corpus[1].image)


# Evaluation

def test_score_images_self_evaluation(embedder, corpus):
    images = [s.image for s in corpus]
    landmarks = [s.landmarks for s in corpus]
    report = score_images(images, images, UniformClassifier(), embedder, landmarks, landmarks)
    assert report.psnr_mean == math.inf
    assert report.ssim_mean == pytest.approx(1.0)
    assert report.inception_score == pytest.approx(1.0)
    assert report.lpips_like_mean == pytest.approx(0.0, abs=1e-12)
    assert report.landmark_l2_mean == 0.0
    assert report.n_samples == len(corpus)


def test_score_images_without_embedder(corpus):
    images = [s.image for s in corpus]
    report = score_images(images, images[::-1], UniformClassifier())
    assert report.lpips_like_mean is None
    assert "n/a" in report.to_text()
    assert json.loads(report.to_json())["n_samples"] == len(images)
    with pytest.raises(DatasetError):
        score_images([], [], UniformClassifier())


def test_evaluate_model_writes_sheet(tmp_path, tiny_config, corpus, embedder):
    state = TrainState(tiny_config, corpus.vocabulary, embedder=embedder)
    sheet = tmp_path / "samples.png"
    report = evaluate_model(state, corpus, seed=0, classifier=UniformClassifier(), sheet_path=str(sheet))
    assert isinstance(report, MetricsReport)
    assert report.n_samples == 18
    assert report.eval_deterministic
    assert report.lpips_like_mean is not None
    assert sheet.is_file()

    again = evaluate_model(state, corpus, seed=0, classifier=UniformClassifier())
    assert again.psnr_mean == pytest.approx(report.psnr_mean)


# Augmentation experiment

@pytest.mark.parametrize("kind", ["noise", "rotate", "crop"])
def test_traditional_augment_keeps_shape_and_range(corpus, kind):
    out = traditional_augment(corpus[0].image, kind, np.random.default_rng(0))
    assert out.shape == (32, 32, 3)
    assert out.dtype == np.float32
    assert out.min() >= -1.0 and out.max() <= 1.0


def test_traditional_augment_unknown_kind(corpus):
    with pytest.raises(ValueError):
        traditional_augment(corpus[0].image, "flip", np.random.default_rng(0))


def test_augment_to_count(corpus):
    out = augment_to_count(corpus, 20, seed=0)
    assert len(out) == 20
    assert {label for _, label in out} <= set(TINY_EXPRESSIONS)


def test_classifier_probabilities(corpus):
    model = train_classifier([(s.image, s.expression) for s in corpus], corpus.vocabulary, epochs=1)
    probs = model.predict_proba(np.stack([s.image for s in corpus]))
    assert probs.shape == (len(corpus), 3)
    assert np.allclose(probs.sum(axis=1), 1.0)
    assert isinstance(model, ExpressionClassifier)


def test_classifier_needs_every_class(corpus):
    samples = [(s.image, s.expression) for s in corpus if s.expression != "sad"]
    with pytest.raises(DatasetError):
        train_classifier(samples, corpus.vocabulary, epochs=1)


def test_augmentation_experiment_sizes(corpus):
    synthetic = synth_corpus(2, TINY_EXPRESSIONS, resolution=32, seed=9)
    test = synth_corpus(2, TINY_EXPRESSIONS, resolution=32, seed=11)
    table = augmentation_experiment(corpus, synthetic, test, seed=0, epochs=1)
    assert isinstance(table, AccuracyTable)
    assert list(table.accuracies) == list(MODES)
    assert table.train_sizes == {"Real/Real": 9, "Real/Syn": 9, "Real+Nor": 15, "Real+Syn": 15}
    assert table.test_sizes == {"Real/Real": 6, "Real/Syn": 6, "Real+Nor": 6, "Real+Syn": 6}
    assert all(0.0 <= acc <= 1.0 for acc in table.accuracies.values())
    assert "Real+Syn" in table.to_text()
    assert json.loads(table.to_json())["modes"]["Real/Real"]["train_size"] == 9


def test_augmentation_experiment_rejects_unknown_mode(corpus):
    with pytest.raises(ValueError):
        augmentation_experiment(corpus, corpus, corpus, modes=["Real+Flip"])


def test_classifier_is_seeded(corpus):
    samples = [(s.image, s.expression) for s in corpus]
    a = train_classifier(samples, corpus.vocabulary, seed=4, epochs=1)
    b = train_classifier(samples, corpus.vocabulary, seed=4, epochs=1)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)
