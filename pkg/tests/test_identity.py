import numpy as np
import pytest
import torch

from expression_gan.errors import CheckpointError, DatasetError, EmbedderNotFrozenError
from expression_gan.identity import IdentityEmbedder, embed, load_embedder, save_embedder, train_embedder


def test_embedder_is_frozen_after_training(embedder):
    assert embedder.frozen
    assert not any(p.requires_grad for p in embedder.parameters())
    embedder.train()
    assert not embedder.training
    assert 0.0 <= embedder.train_accuracy <= 1.0


def test_embeddings_are_unit_norm_and_deterministic(embedder, corpus):
    first = embed(embedder, corpus[0].image)
    assert first.shape == (16,)
    assert np.linalg.norm(first) == pytest.approx(1.0, abs=1e-5)
    assert np.array_equal(first, embed(embedder, corpus[0].image))


def test_features_cover_every_stage(embedder):
    features = embedder.features(torch.zeros(1, 3, 32, 32))
    assert [f.shape[1] for f in features] == [16, 32, 64, 64]
    assert features[-1].shape[-1] == 2


def test_training_is_seeded(corpus, embedder):
    again = train_embedder(corpus, epochs=2, seed=0, embedding_dim=16, progress=False)
    assert again.fingerprint == embedder.fingerprint


def test_fingerprint_survives_save_and_load(tmp_path, embedder):
    path = save_embedder(embedder, str(tmp_path / "embedder.pt"))
    loaded = load_embedder(path)
    assert loaded.frozen
    assert loaded.fingerprint == embedder.fingerprint
    assert loaded.subject_vocab == embedder.subject_vocab


def test_load_missing_embedder(tmp_path):
    with pytest.raises(CheckpointError):
        load_embedder(str(tmp_path / "missing.pt"))


def test_single_subject_cannot_train(corpus):
    one_subject = corpus.subset(lambda s: s.subject_id == "s00")
    with pytest.raises(DatasetError):
        train_embedder(one_subject, epochs=1, progress=False)


def test_unfrozen_embedder_refuses_to_embed():
    with pytest.raises(EmbedderNotFrozenError):
        embed(IdentityEmbedder(8), np.zeros((32, 32, 3), dtype=np.float32))
