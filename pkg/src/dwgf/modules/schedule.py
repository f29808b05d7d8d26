import logging
import math
from numbers import Integral
from typing import List, Tuple

import torch
from torch import Tensor

from dwgf.errors import ConfigError, DomainError, ShapeError

pylogger = logging.getLogger(__name__)


class Schedule:
    """Variance-preserving diffusion schedule on the grid s = 0, ..., T.

    The forward kernel is p(z_s | z_0) = N(alpha_s z_0, sigma_s^2 I) with

        alpha_s = exp(-B(s / T) / 2),  sigma_s = sqrt(1 - alpha_s^2),
        B(tau) = beta_min * tau + (beta_max - beta_min) * tau^2 / 2,

    i.e. the integral of a linear rate over normalized time. alpha_T > 0, so the
    regularization weight c * sigma_s^2 / alpha_s stays finite on the whole grid.
    """

    def __init__(self, T: int = 999, beta_min: float = 0.1, beta_max: float = 20.0):
        if not isinstance(T, Integral) or T < 1:
            raise ConfigError("T", reason=f"must be a positive integer, got {T!r}")
        if not beta_min > 0:
            raise ConfigError("beta_min", reason=f"must be positive, got {beta_min}")
        if not beta_max >= beta_min:
            raise ConfigError("beta_min", "beta_max", reason=f"need beta_max >= beta_min, got {beta_min}, {beta_max}")

        self.T = int(T)
        self.beta_min = float(beta_min)
        self.beta_max = float(beta_max)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(T={self.T}, beta_min={self.beta_min}, beta_max={self.beta_max})"

    def integrated_rate(self, tau):
        return self.beta_min * tau + 0.5 * (self.beta_max - self.beta_min) * tau**2

    def marginal_coefficients(self, s: Tensor) -> Tuple[Tensor, Tensor]:
        """Continuous-time (alpha, sigma) for real times s in [0, T], elementwise."""
        tau = torch.as_tensor(s, dtype=torch.get_default_dtype()) / self.T
        half_rate = 0.5 * self.integrated_rate(tau)

        alpha = torch.exp(-half_rate)
        # 1 - alpha^2 through expm1 keeps sigma accurate near s = 0
        sigma = torch.sqrt(-torch.expm1(-2.0 * half_rate))
        return alpha, sigma

    def check_time(self, s) -> int:
        if isinstance(s, Tensor):
            if s.numel() != 1:
                raise ShapeError(f"Expected a scalar diffusion time, got shape {tuple(s.shape)}")
            s = s.item()

        if isinstance(s, float) and s.is_integer():
            s = int(s)
        if not isinstance(s, Integral):
            raise DomainError(f"Diffusion time must lie on the integer grid 0..{self.T}, got {s!r}")
        if not 0 <= s <= self.T:
            raise DomainError(f"Diffusion time {s} outside [0, {self.T}]")

        return int(s)

    def alpha_sigma(self, s: int) -> Tuple[float, float]:
        s = self.check_time(s)
        half_rate = 0.5 * self.integrated_rate(s / self.T)

        return math.exp(-half_rate), math.sqrt(-math.expm1(-2.0 * half_rate))

    def diffuse(self, z0: Tensor, s: int, eps: Tensor) -> Tensor:
        """Reparameterized draw from the forward kernel: alpha_s * z0 + sigma_s * eps."""
        if z0.shape[-1] != eps.shape[-1]:
            raise ShapeError(f"Noise dimension {eps.shape[-1]} does not match latent dimension {z0.shape[-1]}")

        alpha, sigma = self.alpha_sigma(s)
        return alpha * z0 + sigma * eps

    def weight(self, s: int, c: float) -> float:
        """Regularization weight w(s) = c * sigma_s^2 / alpha_s."""
        check_weighting_constant(c)

        alpha, sigma = self.alpha_sigma(s)
        return c * sigma**2 / alpha

    def sweep(self, include_zero: bool = False) -> List[int]:
        """Deterministic visiting order T, T-1, ..., 1 (and 0 when asked)."""
        stop = -1 if include_zero else 0
        return list(range(self.T, stop, -1))


def check_weighting_constant(c: float) -> float:
    if not 0.0 < c < 1.0:
        raise ConfigError("c", reason=f"weighting constant must lie in (0, 1), got {c}")
    return c
