"""
Training state and its on-disk layout.

A checkpoint is a directory ``ckpt_<step>/`` holding:

    models.pt      state dicts of g_l, g_e, d_l, d_e
    optimizers.pt  Adam state of the four optimisers
    config.json    the TrainConfig of the run
    rng.pt         torch random stream state
    meta.json      step, epoch position, vocabulary and architecture specs

Directories are written under a temporary name and renamed into place.
"""

import os
import re
import json
import shutil
import logging
from typing import Dict, List, Optional, Sequence

import torch
import torch.nn as nn

from .config import TrainConfig
from .errors import CheckpointError
from .identity import IdentityEmbedder, load_embedder
from .models import (DiscriminatorSpec, GeneratorSpec, build_discriminator, build_expression_generator,
                     build_landmark_generator)

logger = logging.getLogger(__name__)

NET_NAMES = ("g_l", "g_e", "d_l", "d_e")
_CKPT_DIR = re.compile(r"^ckpt_(\d+)$")


def network_specs(config: TrainConfig, vocabulary: Sequence[str], intensity_levels: int = 0) -> Dict[str, dict]:
    """Architecture specs of the four networks for a configuration."""
    labels = [len(vocabulary)]
    if config.intensity_conditioning:
        if intensity_levels < 1:
            raise CheckpointError("intensity conditioning needs a dataset with intensity levels")
        labels.append(intensity_levels)
    gl_labels = labels if config.label_routing in ("Gl_and_Ge", "Gl_only") else []
    ge_labels = labels if config.label_routing in ("Gl_and_Ge", "Ge_only") else []
    common = dict(resolution=config.resolution, base_filters=config.base_filters, radius=config.radius,
                  softness=config.softness, color_mode=config.color_mode, coord_hidden=config.coord_hidden)
    return {
        "g_l": GeneratorSpec(in_channels=3, out_channels=3, label_dims=gl_labels, coordinate_head=True,
                             **common).to_dict(),
        "g_e": GeneratorSpec(in_channels=6, out_channels=3, label_dims=ge_labels, **common).to_dict(),
        "d_l": DiscriminatorSpec(in_channels=3, n_layers=config.disc_layers, base_filters=config.base_filters,
                                 dual=config.dual_discriminators).to_dict(),
        "d_e": DiscriminatorSpec(in_channels=6, n_layers=config.disc_layers, base_filters=config.base_filters,
                                 dual=config.dual_discriminators).to_dict(),
    }


def build_networks(specs: Dict[str, dict]) -> Dict[str, nn.Module]:
    return {
        "g_l": build_landmark_generator(GeneratorSpec.from_dict(specs["g_l"])),
        "g_e": build_expression_generator(GeneratorSpec.from_dict(specs["g_e"])),
        "d_l": build_discriminator(DiscriminatorSpec.from_dict(specs["d_l"])),
        "d_e": build_discriminator(DiscriminatorSpec.from_dict(specs["d_e"])),
    }


class TrainState:
    """Networks, optimisers and position of a training run."""

    def __init__(self, config: TrainConfig, vocabulary: Sequence[str], intensity_levels: int = 0,
                 embedder: Optional[IdentityEmbedder] = None, embedder_path: Optional[str] = None):
        self.config = config
        self.vocabulary: List[str] = list(vocabulary)
        self.intensity_levels = intensity_levels if config.intensity_conditioning else 0
        self.embedder = embedder
        self.embedder_path = embedder_path
        self.specs = network_specs(config, self.vocabulary, intensity_levels)

        torch.manual_seed(config.seed)
        self.nets = build_networks(self.specs)
        self.optims = {
            name: torch.optim.Adam(net.parameters(), lr=config.lr, betas=(config.beta1, config.beta2))
            for name, net in self.nets.items()
        }
        self.step = 0
        self.epoch = 0
        self.position = 0

    @property
    def resolution(self) -> int:
        return self.config.resolution

    def train(self) -> None:
        for net in self.nets.values():
            net.train()

    def eval(self) -> None:
        for net in self.nets.values():
            net.eval()

    def meta(self) -> Dict:
        return {
            "step": self.step,
            "epoch": self.epoch,
            "position": self.position,
            "vocabulary": self.vocabulary,
            "intensity_levels": self.intensity_levels,
            "specs": self.specs,
            "embedder_path": self.embedder_path,
        }


def save_checkpoint(state: TrainState, output_dir: str) -> str:
    """
    Write a checkpoint directory for the current step.

    Args:
        state: Training state.
        output_dir: Run directory.

    Returns:
        Path of the ``ckpt_<step>`` directory.
    """
    final = os.path.join(output_dir, f"ckpt_{state.step}")
    tmp = os.path.join(output_dir, f".ckpt_{state.step}.tmp")
    if os.path.exists(tmp):
        shutil.rmtree(tmp)
    os.makedirs(tmp)

    torch.save({name: net.state_dict() for name, net in state.nets.items()}, os.path.join(tmp, "models.pt"))
    torch.save({name: opt.state_dict() for name, opt in state.optims.items()}, os.path.join(tmp, "optimizers.pt"))
    torch.save({"torch": torch.get_rng_state()}, os.path.join(tmp, "rng.pt"))
    with open(os.path.join(tmp, "config.json"), "w") as f:
        json.dump(state.config.to_dict(), f, indent=2, sort_keys=True)
    with open(os.path.join(tmp, "meta.json"), "w") as f:
        json.dump(state.meta(), f, indent=2, sort_keys=True)

    if os.path.exists(final):
        shutil.rmtree(final)
    os.replace(tmp, final)
    logger.info(f"Saved checkpoint {final}")
    return final


def load_checkpoint(path: str, embedder: Optional[IdentityEmbedder] = None, restore_rng: bool = True) -> TrainState:
    """
    Rebuild a TrainState from a checkpoint directory.

    Args:
        path: ``ckpt_<step>`` directory.
        embedder: Identity embedder to attach; loaded from the recorded path if omitted.
        restore_rng: Restore the torch random stream (needed for exact resumption).

    Raises:
        CheckpointError: for missing or unreadable files.
    """
    if not os.path.isdir(path):
        raise CheckpointError(f"checkpoint {path} not found")
    try:
        with open(os.path.join(path, "config.json")) as f:
            config = TrainConfig.from_dict(json.load(f))
        with open(os.path.join(path, "meta.json")) as f:
            meta = json.load(f)
        models = torch.load(os.path.join(path, "models.pt"), map_location="cpu")
        optims = torch.load(os.path.join(path, "optimizers.pt"), map_location="cpu")
        rng = torch.load(os.path.join(path, "rng.pt"), map_location="cpu")
    except (OSError, ValueError, RuntimeError) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e

    embedder_path = meta.get("embedder_path")
    if embedder is None and config.use_identity_loss and embedder_path and os.path.isfile(embedder_path):
        embedder = load_embedder(embedder_path)

    state = TrainState(config, meta["vocabulary"], meta["intensity_levels"], embedder, embedder_path)
    try:
        for name in NET_NAMES:
            state.nets[name].load_state_dict(models[name])
            state.optims[name].load_state_dict(optims[name])
    except (KeyError, RuntimeError) as e:
        raise CheckpointError(f"checkpoint {path} does not match its recorded architecture: {e}") from e
    state.step, state.epoch, state.position = meta["step"], meta["epoch"], meta["position"]
    if restore_rng:
        torch.set_rng_state(rng["torch"])
    logger.info(f"Loaded checkpoint {path} (step {state.step})")
    return state


def list_checkpoints(output_dir: str) -> List[str]:
    """Checkpoint directories under output_dir, in step order."""
    if not os.path.isdir(output_dir):
        return []
    found = []
    for name in os.listdir(output_dir):
        match = _CKPT_DIR.match(name)
        if match and os.path.isdir(os.path.join(output_dir, name)):
            found.append((int(match.group(1)), os.path.join(output_dir, name)))
    return [path for _, path in sorted(found)]


def latest_checkpoint(output_dir: str) -> Optional[str]:
    checkpoints = list_checkpoints(output_dir)
    return checkpoints[-1] if checkpoints else None


def clear_checkpoints(output_dir: str) -> int:
    """Delete every checkpoint directory under output_dir; returns how many were removed."""
    checkpoints = list_checkpoints(output_dir)
    for path in checkpoints:
        shutil.rmtree(path)
    return len(checkpoints)
