"""
Identity embedder used by the identity-preservation loss and the perceptual distance.

A small convolutional network is trained as a subject classifier on the training
split; the classification head is discarded, embeddings are L2-normalised and the
network is frozen.
"""

import os
import logging
from typing import List, Optional, Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from tqdm import tqdm

from .data.types import Dataset
from .errors import CheckpointError, DatasetError, EmbedderNotFrozenError
from .utils.images import to_tensor
from .utils.torch_utils import freeze, parameter_hash

logger = logging.getLogger(__name__)

STAGE_WIDTHS = (16, 32, 64, 64)


class IdentityEmbedder(nn.Module):
    """Convolutional feature extractor F with unit-norm embeddings."""

    def __init__(self, embedding_dim: int = 64, subject_vocab: Optional[Sequence[str]] = None,
                 widths: Sequence[int] = STAGE_WIDTHS):
        super().__init__()
        self.embedding_dim = embedding_dim
        self.subject_vocab: List[str] = list(subject_vocab or [])
        self.widths = list(widths)
        stages = []
        prev = 3
        for width in self.widths:
            stages.append(nn.Sequential(nn.Conv2d(prev, width, kernel_size=3, stride=2, padding=1), nn.ReLU()))
            prev = width
        self.stages = nn.ModuleList(stages)
        self.projection = nn.Linear(prev, embedding_dim)
        self.frozen = False

    def features(self, x: torch.Tensor) -> List[torch.Tensor]:
        """Activations of every convolutional stage."""
        out = []
        for stage in self.stages:
            x = stage(x)
            out.append(x)
        return out

    def project(self, x: torch.Tensor) -> torch.Tensor:
        """Unnormalised embedding from the pooled last stage."""
        pooled = F.adaptive_avg_pool2d(self.features(x)[-1], 1).flatten(1)
        return self.projection(pooled)

    def embed_tensor(self, x: torch.Tensor) -> torch.Tensor:
        return F.normalize(self.project(x), p=2, dim=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.embed_tensor(x)

    def freeze(self) -> "IdentityEmbedder":
        freeze(self)
        self.frozen = True
        return self

    def train(self, mode: bool = True) -> "IdentityEmbedder":
        return super().train(mode and not getattr(self, "frozen", False))

    @property
    def fingerprint(self) -> str:
        return parameter_hash(self)


def embed(embedder: IdentityEmbedder, image: np.ndarray) -> np.ndarray:
    """Unit-norm embedding of one HxWx3 image in [-1, 1]."""
    if not embedder.frozen:
        raise EmbedderNotFrozenError("embed() requires a frozen embedder")
    with torch.no_grad():
        return embedder.embed_tensor(to_tensor(image))[0].numpy()


def train_embedder(train: Dataset, epochs: int = 20, seed: int = 0, embedding_dim: int = 64,
                   batch_size: int = 8, lr: float = 1e-3, progress: bool = True) -> IdentityEmbedder:
    """
    Train the embedder as a subject classifier and freeze it.

    Args:
        train: Training dataset (>= 2 subjects).
        epochs: Passes over the data.
        seed: Seed of initialisation and shuffling.
        embedding_dim: Embedding size.
        batch_size: Minibatch size.
        lr: Adam learning rate.
        progress: Show a progress bar.

    Returns:
        Frozen IdentityEmbedder with `train_accuracy` set.
    """
    subjects = train.subjects
    if len(subjects) < 2:
        raise DatasetError("the identity embedder needs at least two subjects")

    torch.manual_seed(seed)
    generator = torch.Generator().manual_seed(seed)
    embedder = IdentityEmbedder(embedding_dim, subjects)
    head = nn.Linear(embedding_dim, len(subjects))
    optimizer = torch.optim.Adam(list(embedder.parameters()) + list(head.parameters()), lr=lr)

    images = torch.cat([to_tensor(s.image) for s in train])
    targets = torch.tensor([subjects.index(s.subject_id) for s in train], dtype=torch.long)

    embedder.train()
    for epoch in tqdm(range(epochs), desc="embedder", disable=not progress):
        order = torch.randperm(len(targets), generator=generator)
        total = 0.0
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            logits = head(embedder.project(images[idx]))
            loss = F.cross_entropy(logits, targets[idx])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += float(loss) * len(idx)
        logger.debug(f"Embedder epoch {epoch + 1}/{epochs}: loss {total / len(targets):.4f}")

    embedder.eval()
    with torch.no_grad():
        accuracy = float((head(embedder.project(images)).argmax(dim=1) == targets).float().mean())
    embedder.freeze()
    embedder.train_accuracy = accuracy
    logger.info(f"Identity embedder trained on {len(subjects)} subjects: accuracy {accuracy:.3f}")
    return embedder


def save_embedder(embedder: IdentityEmbedder, path: str) -> str:
    """Write the embedder to its own file (separate from GAN checkpoints)."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = f"{path}.tmp"
    torch.save({
        "state_dict": embedder.state_dict(),
        "embedding_dim": embedder.embedding_dim,
        "subject_vocab": embedder.subject_vocab,
        "widths": embedder.widths,
    }, tmp)
    os.replace(tmp, path)
    logger.info(f"Saved identity embedder to {path}")
    return path


def load_embedder(path: str) -> IdentityEmbedder:
    """Load a frozen embedder."""
    if not os.path.isfile(path):
        raise CheckpointError(f"embedder file {path} not found")
    try:
        payload = torch.load(path, map_location="cpu")
        embedder = IdentityEmbedder(payload["embedding_dim"], payload["subject_vocab"], payload["widths"])
        embedder.load_state_dict(payload["state_dict"])
    except (KeyError, RuntimeError) as e:
        raise CheckpointError(f"cannot read embedder {path}: {e}") from e
    return embedder.freeze()
