import logging
from typing import Optional

import torch
import torch.nn as nn
from torch import Tensor

from dwgf.errors import ConfigError, NumericError, ShapeError

pylogger = logging.getLogger(__name__)


class LinearAutoencoder(nn.Module):
    """Frozen linear Gaussian autoencoder.

    Decoder: x = W z + b + rho * eps (a Gaussian decoder with output std rho, reparameterized).
    Encoder: deterministic affine map z = E_W x + E_b, i.e. the mean of the approximate posterior.
    """

    def __init__(
        self,
        weight: Tensor,
        bias: Tensor,
        rho: float,
        encoder_weight: Tensor,
        encoder_bias: Tensor,
    ):
        super().__init__()

        weight = torch.as_tensor(weight, dtype=torch.get_default_dtype())
        bias = torch.as_tensor(bias, dtype=torch.get_default_dtype())
        encoder_weight = torch.as_tensor(encoder_weight, dtype=torch.get_default_dtype())
        encoder_bias = torch.as_tensor(encoder_bias, dtype=torch.get_default_dtype())

        check_decoder(weight, bias, rho)
        pixel_dim, latent_dim = weight.shape
        if encoder_weight.shape != (latent_dim, pixel_dim) or encoder_bias.shape != (latent_dim,):
            raise ShapeError(
                f"Encoder must map R^{pixel_dim} -> R^{latent_dim}, got weight {tuple(encoder_weight.shape)} "
                f"and bias {tuple(encoder_bias.shape)}"
            )

        self.rho = float(rho)

        self.decoder = nn.Linear(latent_dim, pixel_dim, dtype=weight.dtype)
        self.encoder = nn.Linear(pixel_dim, latent_dim, dtype=weight.dtype)
        with torch.no_grad():
            self.decoder.weight.copy_(weight)
            self.decoder.bias.copy_(bias)
            self.encoder.weight.copy_(encoder_weight)
            self.encoder.bias.copy_(encoder_bias)

        self.requires_grad_(False)

    @property
    def latent_dim(self) -> int:
        return self.decoder.in_features

    @property
    def pixel_dim(self) -> int:
        return self.decoder.out_features

    @property
    def weight(self) -> Tensor:
        return self.decoder.weight

    @property
    def bias(self) -> Tensor:
        return self.decoder.bias

    def extra_repr(self) -> str:
        return f"latent_dim={self.latent_dim}, pixel_dim={self.pixel_dim}, rho={self.rho}"

    def decode(self, z: Tensor, eps: Optional[Tensor] = None) -> Tensor:
        if z.shape[-1] != self.latent_dim:
            raise ShapeError(f"Expected latent vectors of dimension {self.latent_dim}, got {z.shape[-1]}")

        x = self.decoder(z)
        if eps is None:
            return x

        if eps.shape[-1] != self.pixel_dim:
            raise ShapeError(f"Expected decoder noise of dimension {self.pixel_dim}, got {eps.shape[-1]}")
        return x + self.rho * eps

    def forward(self, z: Tensor, eps: Optional[Tensor] = None) -> Tensor:
        return self.decode(z, eps)

    def encode(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.pixel_dim:
            raise ShapeError(f"Expected pixel vectors of dimension {self.pixel_dim}, got {x.shape[-1]}")
        return self.encoder(x)

    def decoder_vjp(self, z: Tensor, cotangent: Tensor) -> Tensor:
        """cotangent @ dD/dz. The decoder is affine, so the Jacobian is W at every z."""
        if cotangent.shape[-1] != self.pixel_dim:
            raise ShapeError(f"Expected a cotangent of dimension {self.pixel_dim}, got {cotangent.shape[-1]}")
        return cotangent @ self.weight

    def data_score_approx(self, x: Tensor) -> Tensor:
        """(D(E(x)) - x) / rho^2: the pixel-space prior score under deterministic encoding."""
        return (self.decode(self.encode(x)) - x) / self.rho**2


def check_decoder(weight: Tensor, bias: Tensor, rho: float) -> None:
    if weight.dim() != 2:
        raise ShapeError(f"Decoder weight must be a matrix, got shape {tuple(weight.shape)}")
    pixel_dim, latent_dim = weight.shape
    if bias.shape != (pixel_dim,):
        raise ShapeError(f"Decoder bias must have shape ({pixel_dim},), got {tuple(bias.shape)}")
    if latent_dim > pixel_dim or torch.linalg.matrix_rank(weight).item() < latent_dim:
        raise ConfigError("weight", reason=f"decoder weight {tuple(weight.shape)} must have full column rank")
    if not rho > 0:
        raise ConfigError("rho", reason=f"decoder std must be positive, got {rho}")


def exact_encoder(
    weight: Tensor,
    bias: Tensor,
    rho: float,
    prior_mean: Tensor,
    prior_cov: Tensor,
) -> LinearAutoencoder:
    """Encoder returning the exact posterior mean of z | x.

    With z ~ N(m, S) and x | z ~ N(W z + b, rho^2 I), the posterior precision is
    P = S^-1 + W^T W / rho^2 and the mean is P^-1 (S^-1 m + W^T (x - b) / rho^2), so

        E_W = P^-1 W^T / rho^2,   E_b = P^-1 (S^-1 m - W^T b / rho^2).
    """
    weight = torch.as_tensor(weight, dtype=torch.get_default_dtype())
    bias = torch.as_tensor(bias, dtype=torch.get_default_dtype())
    prior_mean = torch.as_tensor(prior_mean, dtype=weight.dtype)
    prior_cov = torch.as_tensor(prior_cov, dtype=weight.dtype)
    check_decoder(weight, bias, rho)

    prior_tril, info = torch.linalg.cholesky_ex(prior_cov)
    if info.item() > 0:
        raise NumericError("Prior covariance handed to the exact encoder is not positive definite")
    prior_precision = torch.cholesky_inverse(prior_tril)

    precision = prior_precision + weight.T @ weight / rho**2
    precision_tril, info = torch.linalg.cholesky_ex(precision)
    if info.item() > 0:
        raise NumericError("Posterior precision of the exact encoder is singular")

    rhs = torch.cat([weight.T / rho**2, (prior_precision @ prior_mean - weight.T @ bias / rho**2)[:, None]], dim=1)
    solved = torch.cholesky_solve(rhs, precision_tril)

    return LinearAutoencoder(
        weight=weight,
        bias=bias,
        rho=rho,
        encoder_weight=solved[:, :-1],
        encoder_bias=solved[:, -1],
    )


def pseudo_inverse_encoder(weight: Tensor, bias: Tensor, rho: float) -> LinearAutoencoder:
    """Left inverse of the decoder, E(x) = W^+ (x - b): the flat-prior limit of the exact encoder.

    E(D(z)) = z holds exactly, and D(E(x)) is the orthogonal projection of x onto the decoder range.
    """
    weight = torch.as_tensor(weight, dtype=torch.get_default_dtype())
    bias = torch.as_tensor(bias, dtype=torch.get_default_dtype())
    check_decoder(weight, bias, rho)

    left_inverse = torch.linalg.pinv(weight)
    return LinearAutoencoder(
        weight=weight,
        bias=bias,
        rho=rho,
        encoder_weight=left_inverse,
        encoder_bias=-left_inverse @ bias,
    )


def random_decoder_weight(latent_dim: int, pixel_dim: int, generator: torch.Generator) -> Tensor:
    """Seeded Gaussian decoder weight, scaled so that columns have unit expected norm."""
    if latent_dim > pixel_dim:
        raise ConfigError(
            "latent_dim", "pixel_dim", reason=f"need latent_dim <= pixel_dim, got {latent_dim} > {pixel_dim}"
        )

    weight = torch.randn(pixel_dim, latent_dim, generator=generator) / pixel_dim**0.5
    if torch.linalg.matrix_rank(weight).item() < latent_dim:
        raise NumericError("Random decoder weight is rank deficient, pick another seed")
    return weight
