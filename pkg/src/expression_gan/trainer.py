"""
Alternating optimisation of both stages.

Each step runs four phases in a fixed order:

1. D_l on the landmark image rendered from the target landmarks (real) against
   the detached G_l output (fake).
2. G_l on the stage-I objective.
3. D_e on (y, x) against (detached G_e output, x).
4. G_e on the stage-II objective. Gradients also flow through the rendered
   landmark image into G_l, whose optimiser steps again, unless
   ``detach_stage1_in_stage2`` is set.
"""

import os
import math
import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from tqdm import tqdm

from .checkpoint import TrainState, clear_checkpoints, latest_checkpoint, load_checkpoint, save_checkpoint
from .config import TrainConfig
from .data.pairs import collate_pairs, make_training_pairs
from .data.types import Dataset, TrainingPair
from .errors import ConfigError, DatasetError, TrainingAbortedError
from .identity import IdentityEmbedder, save_embedder, train_embedder
from .landmarks.codec import render_tensor
from .losses import (LossReport, discriminator_loss, full_objective, generator_adversarial_loss, identity_loss,
                     landmark_recon_loss, pixel_loss, stage1_objective, stage2_objective)
from .utils.reporting import JsonlWriter

logger = logging.getLogger(__name__)

LOSS_LOG = "losses.jsonl"
EMBEDDER_FILE = "embedder.pt"

Batch = Union[TrainingPair, Sequence[TrainingPair], Dict[str, Optional[torch.Tensor]]]


def _check_finite(term: str, value: torch.Tensor, step: int) -> None:
    v = float(value.detach())
    if not math.isfinite(v):
        raise TrainingAbortedError(term, step, v)


def _mean_output(maps: Sequence[torch.Tensor]) -> float:
    return float(torch.stack([m.detach().mean() for m in maps]).mean())


def _as_batch(pairs: Batch) -> Dict[str, Optional[torch.Tensor]]:
    if isinstance(pairs, dict):
        return pairs
    if isinstance(pairs, TrainingPair):
        pairs = [pairs]
    return collate_pairs(list(pairs))


def train_step(pairs: Batch, state: TrainState,
               config: Optional[TrainConfig] = None) -> Tuple[TrainState, LossReport]:
    """
    Run one optimisation step of all four networks.

    Args:
        pairs: A TrainingPair, a list of pairs or a collated batch.
        state: Training state; updated in place.
        config: Defaults to state.config.

    Returns:
        (state, LossReport of the step).

    Raises:
        TrainingAbortedError: if any loss term is not finite.
    """
    config = config or state.config
    batch = _as_batch(pairs)
    x, y, l = batch["x"], batch["y"], batch["l"]
    l_e = batch["l_e"]
    l_i = batch["l_i"] if state.intensity_levels else None
    if x.shape[-1] != config.resolution:
        raise DatasetError(f"pair resolution {x.shape[-1]} does not match the configured {config.resolution}")

    g_l, g_e, d_l, d_e = (state.nets[n] for n in ("g_l", "g_e", "d_l", "d_e"))
    opt = state.optims
    weights = config.weights
    step = state.step + 1
    state.train()

    # (1) D_l
    with torch.no_grad():
        _, fake_lm = g_l(x, l_e, l_i)
        real_lm = render_tensor(l, x, config.radius, config.softness, config.color_mode)
    d_l_real, d_l_fake = d_l(real_lm), d_l(fake_lm)
    loss_d_l = discriminator_loss(d_l_real, d_l_fake)
    _check_finite("d_l", loss_d_l, step)
    opt["d_l"].zero_grad()
    loss_d_l.backward()
    opt["d_l"].step()

    # (2) G_l
    coords, lm = g_l(x, l_e, l_i)
    adv_gl = generator_adversarial_loss(d_l(lm))
    if config.use_landmark_recon:
        recon = landmark_recon_loss(coords, l)
    else:
        recon = torch.zeros((), dtype=adv_gl.dtype)
    stage1 = stage1_objective(adv_gl, recon, weights)
    _check_finite("adv_gl", adv_gl, step)
    _check_finite("landmark_recon", recon, step)
    opt["g_l"].zero_grad()
    stage1.backward()
    opt["g_l"].step()

    # (3) D_e
    coords, lm = g_l(x, l_e, l_i)
    if config.detach_stage1_in_stage2:
        lm = lm.detach()
    y_hat = g_e(torch.cat([x, lm], dim=1), l_e, l_i)
    d_e_real = d_e(torch.cat([y, x], dim=1))
    d_e_fake = d_e(torch.cat([y_hat.detach(), x], dim=1))
    loss_d_e = discriminator_loss(d_e_real, d_e_fake)
    _check_finite("d_e", loss_d_e, step)
    opt["d_e"].zero_grad()
    loss_d_e.backward()
    opt["d_e"].step()

    # (4) G_e, coupled into G_l through the rendered landmark image
    adv_ge = generator_adversarial_loss(d_e(torch.cat([y_hat, x], dim=1)))
    pix = pixel_loss(y_hat, y, config.recon_mode)
    if config.use_identity_loss:
        if state.embedder is None:
            raise ConfigError("use_identity_loss is set but no identity embedder is attached")
        ident = identity_loss(state.embedder, y, y_hat)
    else:
        ident = torch.zeros((), dtype=adv_ge.dtype)
    stage2 = stage2_objective(adv_ge, pix, ident, weights)
    for term, value in (("adv_ge", adv_ge), ("l12", pix), ("identity", ident)):
        _check_finite(term, value, step)
    opt["g_e"].zero_grad()
    opt["g_l"].zero_grad()
    stage2.backward()
    opt["g_e"].step()
    if not config.detach_stage1_in_stage2:
        opt["g_l"].step()

    state.step = step
    stage1_total, stage2_total = float(stage1.detach()), float(stage2.detach())
    return state, LossReport(
        step=step,
        adv_gl=float(adv_gl.detach()),
        landmark_recon=float(recon.detach()),
        adv_ge=float(adv_ge.detach()),
        l12=float(pix.detach()),
        identity=float(ident.detach()),
        d_l=float(loss_d_l.detach()),
        d_e=float(loss_d_e.detach()),
        stage1_total=stage1_total,
        stage2_total=stage2_total,
        full=float(full_objective(stage1_total, stage2_total)),
        d_l_real=_mean_output(d_l_real),
        d_l_fake=_mean_output(d_l_fake),
        d_e_real=_mean_output(d_e_real),
        d_e_fake=_mean_output(d_e_fake),
    )


def prepare_embedder(dataset: Dataset, config: TrainConfig, output_dir: str,
                     progress: bool = True) -> Optional[IdentityEmbedder]:
    """Train and save the identity embedder when the identity loss is enabled."""
    if not config.use_identity_loss:
        return None
    embedder = train_embedder(dataset, config.embedder_epochs, config.seed, config.embedding_dim,
                              progress=progress)
    save_embedder(embedder, os.path.join(output_dir, EMBEDDER_FILE))
    return embedder


def train(dataset: Dataset, config: TrainConfig, output_dir: str, embedder: Optional[IdentityEmbedder] = None,
          resume: bool = True, progress: bool = True) -> List[str]:
    """
    Train both stages on a dataset.

    Pairs are drawn with config.pairing_policy and visited in an order seeded by
    (seed + epoch). Checkpoints are written every config.checkpoint_every steps and
    at the end; every step's LossReport is appended to ``losses.jsonl``.

    Args:
        dataset: Training dataset.
        config: Training configuration.
        output_dir: Run directory for checkpoints, logs and the embedder.
        embedder: Frozen identity embedder; trained on the dataset when omitted.
        resume: Continue from the latest checkpoint in output_dir if one exists; when
            False, old checkpoints and the loss log in output_dir are discarded.
        progress: Show a progress bar.

    Returns:
        Paths of the checkpoints written by this call.
    """
    if len(dataset) == 0:
        raise DatasetError("cannot train on an empty dataset")
    if dataset.resolution != config.resolution:
        raise DatasetError(f"dataset resolution {dataset.resolution} != configured {config.resolution}")
    pairs = make_training_pairs(dataset, config.pairing_policy, config.seed)
    if not pairs:
        raise DatasetError(f"no training pairs under policy '{config.pairing_policy}'")

    os.makedirs(output_dir, exist_ok=True)
    log = JsonlWriter(os.path.join(output_dir, LOSS_LOG))
    previous = latest_checkpoint(output_dir) if resume else None
    if previous:
        state = load_checkpoint(previous, embedder)
        log.truncate_after(state.step)
        logger.info(f"Resuming from {previous} at step {state.step}")
    else:
        removed = clear_checkpoints(output_dir)
        log.truncate_after(0)
        if removed:
            logger.info(f"Starting over in {output_dir}: removed {removed} old checkpoints and the loss log")
        if embedder is None:
            embedder = prepare_embedder(dataset, config, output_dir, progress)
        embedder_path = os.path.join(output_dir, EMBEDDER_FILE) if embedder is not None else None
        state = TrainState(config, dataset.vocabulary, dataset.intensity_levels, embedder, embedder_path)

    steps_per_epoch = math.ceil(len(pairs) / config.batch_size)
    total = config.epochs * steps_per_epoch
    if config.max_steps is not None:
        total = min(total, config.max_steps)

    written: List[str] = []
    bar = tqdm(total=total, initial=state.step, desc="train", disable=not progress)
    while state.step < total:
        order = np.random.default_rng(config.seed + state.epoch).permutation(len(pairs))
        while state.position < len(order) and state.step < total:
            idx = order[state.position:state.position + config.batch_size]
            _, report = train_step([pairs[i] for i in idx], state, config)
            state.position += len(idx)
            if state.position >= len(order):
                state.epoch += 1
                state.position = 0
            log.write(report.to_dict())
            bar.update(1)
            if state.step % config.log_every == 0:
                logger.info(report.summary())
            if state.step % config.checkpoint_every == 0:
                written.append(save_checkpoint(state, output_dir))
            if state.position == 0:
                break
    bar.close()

    if not written or not written[-1].endswith(f"ckpt_{state.step}"):
        written.append(save_checkpoint(state, output_dir))
    logger.info(f"Training finished at step {state.step}")
    return written
