import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "src")))

from expression_gan.config import TrainConfig
from expression_gan.data import synth_corpus
from expression_gan.identity import train_embedder

TINY_EXPRESSIONS = ("happy", "neutral", "sad")


@pytest.fixture(scope="session")
def corpus():
    """3 subjects x 3 expressions at 32x32."""
    return synth_corpus(3, TINY_EXPRESSIONS, resolution=32, seed=0)


@pytest.fixture(scope="session")
def embedder(corpus):
    return train_embedder(corpus, epochs=2, seed=0, embedding_dim=16, progress=False)


@pytest.fixture
def tiny_config():
    return TrainConfig(
        resolution=32,
        base_filters=8,
        coord_hidden=32,
        embedding_dim=16,
        embedder_epochs=2,
        checkpoint_every=1000,
        log_every=1,
        max_steps=2,
    )


def spread_layout(resolution: int, spacing: float, seed: int = 0, jitter: float = 1.0) -> np.ndarray:
    """68 jittered lattice points at least spacing - 2 * jitter apart, away from the border."""
    rng = np.random.default_rng(seed)
    cols = int((resolution - spacing) // spacing)
    grid = [((c + 1) * spacing, (r + 1) * spacing) for r in range(cols) for c in range(cols)]
    assert len(grid) >= 68, "lattice too small for 68 points"
    picks = rng.permutation(len(grid))[:68]
    points = np.asarray([grid[i] for i in picks], dtype=np.float64)
    return points + rng.uniform(-jitter, jitter, points.shape)
