import copy
import math

import numpy as np
import pytest
import torch

from expression_gan.config import LossWeights
from expression_gan.data import LandmarkSet
from expression_gan.errors import EmbedderNotFrozenError
from expression_gan.identity import IdentityEmbedder
from expression_gan.losses import (LossReport, bce, discriminator_loss, full_objective, generator_adversarial_loss,
                                   identity_loss, landmark_recon_loss, pixel_loss, reconstruction_norm, smooth_l12,
                                   stage1_objective, stage2_objective)


def _maps(value, shape=(2, 1, 6, 6)):
    return torch.full(shape, value)


def test_bce_at_one_half_is_log_two():
    assert float(bce(_maps(0.5), 1.0)) == pytest.approx(math.log(2), rel=1e-5)
    assert float(bce(_maps(0.5), 0.0)) == pytest.approx(math.log(2), rel=1e-5)


def test_bce_clamps_saturated_probabilities():
    value = float(bce(_maps(0.0), 1.0))
    assert math.isfinite(value)
    assert value == pytest.approx(-math.log(1e-7), rel=1e-3)


def test_discriminator_loss():
    assert float(discriminator_loss(_maps(0.5), _maps(0.5))) == pytest.approx(math.log(2), rel=1e-5)
    assert float(discriminator_loss(_maps(1.0), _maps(0.0))) < 1e-5
    dual = discriminator_loss([_maps(0.5), _maps(1.0)], [_maps(0.5), _maps(0.0)])
    assert float(dual) == pytest.approx(math.log(2) / 2, rel=1e-4)
    with pytest.raises(ValueError):
        discriminator_loss([_maps(0.5)], [_maps(0.5), _maps(0.5)])


def test_generator_adversarial_loss():
    assert float(generator_adversarial_loss(_maps(0.5))) == pytest.approx(math.log(2), rel=1e-5)
    assert float(generator_adversarial_loss([_maps(1.0), _maps(1.0)])) < 1e-5


def test_landmark_recon_loss():
    pred = torch.zeros(2, 68, 2)
    target = torch.tensor([3.0, 4.0]).expand(2, 68, 2)
    assert float(landmark_recon_loss(pred, target)) == pytest.approx(5.0, rel=1e-6)
    assert float(landmark_recon_loss(pred.reshape(2, 136), target)) == pytest.approx(5.0, rel=1e-6)
    single = LandmarkSet(np.full((68, 2), 0.1))
    assert float(landmark_recon_loss(torch.zeros(68, 2), single)) == pytest.approx(0.1 * math.sqrt(2), rel=1e-4)
    with pytest.raises(ValueError):
        landmark_recon_loss(torch.zeros(2, 68, 2), torch.zeros(3, 68, 2))


def test_smooth_l12_piecewise():
    zero = torch.zeros(4)
    assert float(smooth_l12(torch.full((4,), 0.5), zero)) == pytest.approx(0.125)
    assert float(smooth_l12(torch.full((4,), -2.0), zero)) == pytest.approx(1.5)
    assert float(smooth_l12(torch.tensor([0.5, 2.0]), torch.zeros(2))) == pytest.approx((0.125 + 1.5) / 2)


def test_reconstruction_norms_and_pixel_loss_modes():
    a, b = torch.tensor([1.0, -1.0]), torch.tensor([0.0, 1.0])
    assert float(reconstruction_norm(a, b, "L1")) == pytest.approx(1.5)
    assert float(reconstruction_norm(a, b, "L2")) == pytest.approx(2.5)
    assert float(pixel_loss(a, b, "l1")) == pytest.approx(1.5)
    assert float(pixel_loss(a, b, "l2")) == pytest.approx(2.5)
    assert float(pixel_loss(a, b)) == pytest.approx(float(smooth_l12(a, b)))
    with pytest.raises(ValueError):
        reconstruction_norm(a, b, "huber")
    with pytest.raises(ValueError):
        smooth_l12(a, torch.zeros(3))


def test_objectives_combine_terms():
    weights = LossWeights()
    assert stage1_objective(1.0, 2.0, weights) == pytest.approx(5.0)
    assert stage2_objective(1.0, 0.5, 2.0, weights) == pytest.approx(51.2)
    assert full_objective(5.0, 51.2) == pytest.approx(56.2)
    assert stage2_objective(1.0, 0.5, 2.0, LossWeights(lambda2=0.0, lambda3=0.0)) == pytest.approx(1.0)


def test_identity_loss_requires_frozen_embedder():
    images = torch.zeros(1, 3, 32, 32)
    with pytest.raises(EmbedderNotFrozenError):
        identity_loss(IdentityEmbedder(16), images, images)


def test_identity_loss_is_zero_for_identical_faces_and_flows_into_output(embedder):
    torch.manual_seed(0)
    y = torch.rand(2, 3, 32, 32) * 2 - 1
    assert float(identity_loss(embedder, y, y.clone())) == pytest.approx(0.0, abs=1e-7)
    y_hat = (torch.rand(2, 3, 32, 32) * 2 - 1).requires_grad_(True)
    identity_loss(embedder, y, y_hat).backward()
    assert y_hat.grad is not None and y_hat.grad.abs().sum() > 0
    assert all(p.grad is None for p in embedder.parameters())


@pytest.mark.parametrize("seed", range(20))
def test_loss_gradchecks(seed):
    torch.manual_seed(seed)
    pred = (torch.rand(2, 68, 2, dtype=torch.float64) * 10).requires_grad_(True)
    target = torch.rand(2, 68, 2, dtype=torch.float64) * 10
    assert torch.autograd.gradcheck(lambda p: landmark_recon_loss(p, target), (pred,))

    # keep differences away from the |d| = 1 kink
    image = (torch.rand(1, 3, 8, 8, dtype=torch.float64) * 0.8 + 0.1).requires_grad_(True)
    assert torch.autograd.gradcheck(lambda x: smooth_l12(x, torch.zeros_like(x)), (image,))


def _identity_gradcheck(embedder, seed):
    torch.manual_seed(seed)
    double = copy.deepcopy(embedder).double()
    y = torch.rand(1, 3, 32, 32, dtype=torch.float64) * 2 - 1
    y_hat = (torch.rand(1, 3, 32, 32, dtype=torch.float64) * 2 - 1).requires_grad_(True)
    return torch.autograd.gradcheck(lambda out: identity_loss(double, y, out), (y_hat,), atol=1e-5)


def test_identity_loss_gradcheck(embedder):
    assert _identity_gradcheck(embedder, 0)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(1, 20))
def test_identity_loss_gradcheck_seeds(embedder, seed):
    assert _identity_gradcheck(embedder, seed)


def test_loss_report_round_trip():
    report = LossReport(step=3, adv_gl=0.7, full=12.5)
    data = report.to_dict()
    data["unknown"] = 1
    assert LossReport.from_dict(data) == report
    assert '"step": 3' in report.to_json()
    assert "step 3" in report.summary()


def test_smooth_l12_is_continuous_at_one_and_bounded_by_l1():
    for d in (1.0 - 1e-6, 1.0 + 1e-6):
        x = torch.tensor([d], dtype=torch.float64, requires_grad=True)
        smooth_l12(x, torch.zeros(1, dtype=torch.float64)).backward()
        assert float(x.grad) == pytest.approx(1.0, abs=1e-5)
        assert float(smooth_l12(x.detach(), torch.zeros(1, dtype=torch.float64))) == pytest.approx(0.5, abs=1e-5)

    gen = torch.Generator().manual_seed(0)
    x, y = torch.randn(64, generator=gen) * 3, torch.randn(64, generator=gen) * 3
    assert float(smooth_l12(x, y)) < float(reconstruction_norm(x, y, "L1"))
    assert float(smooth_l12(x, x)) == float(reconstruction_norm(x, x, "L1")) == 0.0


def test_discriminator_loss_halves_the_bce_sum():
    gen = torch.Generator().manual_seed(1)
    real = torch.rand(2, 1, 6, 6, generator=gen) * 0.98 + 0.01
    fake = torch.rand(2, 1, 6, 6, generator=gen) * 0.98 + 0.01
    expected = 0.5 * (bce(real, 1.0) + bce(fake, 0.0))
    assert float(discriminator_loss(real, fake)) == pytest.approx(float(expected), rel=1e-6)


def test_losses_ignore_batch_order(embedder):
    gen = torch.Generator().manual_seed(3)
    perm = torch.randperm(4, generator=gen)
    real = [torch.rand(4, 1, 6, 6, generator=gen), torch.rand(4, 1, 3, 3, generator=gen)]
    fake = [torch.rand(4, 1, 6, 6, generator=gen), torch.rand(4, 1, 3, 3, generator=gen)]
    coords, target = torch.rand(4, 68, 2, generator=gen) * 32, torch.rand(4, 68, 2, generator=gen) * 32
    y, y_hat = torch.rand(4, 3, 32, 32, generator=gen) * 2 - 1, torch.rand(4, 3, 32, 32, generator=gen) * 2 - 1

    def shuffled(maps):
        return [m[perm] for m in maps]

    pairs = [
        (discriminator_loss(real, fake), discriminator_loss(shuffled(real), shuffled(fake))),
        (generator_adversarial_loss(fake), generator_adversarial_loss(shuffled(fake))),
        (landmark_recon_loss(coords, target), landmark_recon_loss(coords[perm], target[perm])),
        (identity_loss(embedder, y, y_hat), identity_loss(embedder, y[perm], y_hat[perm])),
    ]
    pairs += [(pixel_loss(y_hat, y, mode), pixel_loss(y_hat[perm], y[perm], mode)) for mode in ("l12", "l1", "l2")]
    for original, permuted in pairs:
        assert float(permuted) == pytest.approx(float(original), rel=1e-6)
