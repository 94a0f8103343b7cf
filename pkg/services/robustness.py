"""
Robustness evaluation: accuracy under additive Gaussian noise and under FGSM
adversarial inputs. Perturbed images are clamped to [0, 1] before encoding.
"""

import math

import numpy as np

from models.network import EVAL, backward_bptt, forward_unrolled, loss_and_output_grad
from services.base_service import BaseEvaluationService
from utils.constants import PassId, StreamLabel
from utils.errors import AnalysisError

# noise streams are keyed by sigma in micro-units
_SIGMA_KEY_SCALE = 1_000_000


def _check_sigma(sigma):
    if not (math.isfinite(sigma) and sigma >= 0):
        raise AnalysisError(f"Noise sigma must be finite and >= 0, got {sigma}")


def _check_eps(eps):
    if not (math.isfinite(eps) and eps >= 0):
        raise AnalysisError(f"FGSM eps must be finite and >= 0, got {eps}")


def gaussian_noise(images, sample_ids, rng, sigma):
    """x + N(0, sigma^2) per pixel, clamped to [0, 1]; sigma = 0 returns x unchanged."""
    _check_sigma(sigma)
    if sigma == 0:
        return images
    key = int(round(sigma * _SIGMA_KEY_SCALE))
    noisy = np.empty_like(images)
    for b, sample_id in enumerate(sample_ids):
        gen = rng.stream(StreamLabel.NOISE, key, int(sample_id))
        noise = gen.normal(0.0, sigma, size=images.shape[1:])
        noisy[b] = np.clip(images[b] + noise, 0.0, 1.0)
    return noisy


def fgsm_attack(net, images, labels, eps, rng, sample_ids=None):
    """
    x_adv = clamp(x + eps * sign(dL/dx), 0, 1). The input gradient flows
    straight through the Poisson encoder: the per-timestep frame gradients
    are averaged over T. sign(0) = 0.
    """
    _check_eps(eps)
    images = np.asarray(images)
    if eps == 0:
        return images.copy()
    potentials, tape = forward_unrolled(
        net,
        images,
        rng,
        mode=EVAL,
        sample_ids=sample_ids,
        pass_id=PassId.EVAL,
        differentiable=True,
    )
    _, output_grad = loss_and_output_grad(potentials, labels)
    grads = backward_bptt(net, tape, output_grad)
    step = np.float32(eps) if images.dtype == np.float32 else eps
    adversarial = images + step * np.sign(grads.input).astype(images.dtype)
    return np.clip(adversarial, 0.0, 1.0).astype(images.dtype, copy=False)


class GaussianNoiseService(BaseEvaluationService):
    """Accuracy against additive Gaussian noise of increasing sigma"""

    analysis_type = "Robustness"
    level_name = "sigma"

    @classmethod
    def _validate_level(cls, level):
        _check_sigma(level)

    @classmethod
    def _perturb(cls, net, images, labels, sample_ids, rng, level):
        return gaussian_noise(images, sample_ids, rng, level)


class FgsmService(BaseEvaluationService):
    """Accuracy against FGSM inputs of increasing eps"""

    analysis_type = "Robustness"
    level_name = "eps"
    batch_size = 64

    @classmethod
    def _validate_level(cls, level):
        _check_eps(level)

    @classmethod
    def _perturb(cls, net, images, labels, sample_ids, rng, level):
        return fgsm_attack(net, images, labels, level, rng, sample_ids)


def gaussian_noise_eval(net, dataset, sigmas, rng):
    """Accuracy curve rows (sigma, accuracy) in the order of ``sigmas``."""
    return GaussianNoiseService.run_sweep(net, dataset, rng, sigmas)


def fgsm_eval(net, dataset, epsilons, rng):
    """Accuracy curve rows (eps, accuracy) in the order of ``epsilons``."""
    return FgsmService.run_sweep(net, dataset, rng, epsilons)
