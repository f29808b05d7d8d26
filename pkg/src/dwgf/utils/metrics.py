import logging
import math
from typing import Tuple, Union

import torch
from torch import Tensor
from torchmetrics.functional import mean_squared_error

from dwgf.errors import DomainError, ShapeError
from dwgf.flow.ensemble import ParticleEnsemble, as_centers

pylogger = logging.getLogger(__name__)

PSNR_CAP = 100.0


def psnr(x: Tensor, x_ref: Tensor, peak: float, cap: float = PSNR_CAP) -> float:
    """Peak signal-to-noise ratio 10 log10(peak^2 / MSE) in dB, `cap` when the signals coincide."""
    if x.shape != x_ref.shape:
        raise ShapeError(f"Cannot compare signals of shapes {tuple(x.shape)} and {tuple(x_ref.shape)}")
    if not peak > 0:
        raise DomainError(f"PSNR peak must be positive, got {peak}")

    mse = mean_squared_error(x, x_ref).item()
    if mse == 0.0:
        return cap
    return 10.0 * math.log10(peak**2 / mse)


def ensemble_stats(ensemble: Union[ParticleEnsemble, Tensor]) -> Tuple[Tensor, Tensor]:
    """Sample mean and unbiased sample covariance of the particles."""
    particles = as_centers(ensemble)
    if particles.shape[0] < 2:
        raise DomainError(f"The sample covariance needs at least 2 particles, got {particles.shape[0]}")

    cov = torch.atleast_2d(torch.cov(particles.T, correction=1))
    return particles.mean(dim=0), cov
