"""Closed-form and brute-force references for the linear-Gaussian setting."""
import logging
from typing import Optional, Sequence, Union

import torch
from torch import Tensor
from torch.distributions import MultivariateNormal, kl_divergence

from dwgf.errors import DomainError, NumericError, ShapeError
from dwgf.modules.autoencoder import LinearAutoencoder
from dwgf.modules.observation import ObservationModel
from dwgf.modules.prior import GaussianMixture
from dwgf.modules.schedule import Schedule, check_weighting_constant

pylogger = logging.getLogger(__name__)


class GaussianDist:
    def __init__(self, mean: Union[Tensor, Sequence], cov: Union[Tensor, Sequence]):
        mean = torch.as_tensor(mean, dtype=torch.get_default_dtype())
        cov = torch.as_tensor(cov, dtype=torch.get_default_dtype())
        if mean.dim() != 1 or cov.shape != (mean.shape[0], mean.shape[0]):
            raise ShapeError(f"Expected mean (d,) and cov (d, d), got {tuple(mean.shape)} and {tuple(cov.shape)}")

        scale_tril, info = torch.linalg.cholesky_ex(cov)
        if info.item() > 0:
            raise NumericError("Gaussian covariance is not positive definite")

        self.mean = mean
        self.cov = cov
        self.scale_tril = scale_tril

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(dim={self.dim})"

    def distribution(self) -> MultivariateNormal:
        return MultivariateNormal(loc=self.mean, scale_tril=self.scale_tril)

    def precision(self) -> Tensor:
        return torch.cholesky_inverse(self.scale_tril)

    def as_mixture(self) -> GaussianMixture:
        return GaussianMixture.gaussian(self.mean, self.cov)

    def diffused_distribution(self, alpha: Tensor, sigma: Tensor) -> MultivariateNormal:
        """Batch of pushforwards N(alpha * mean, alpha^2 cov + sigma^2 I), one per entry of alpha/sigma."""
        alpha = torch.as_tensor(alpha, dtype=self.mean.dtype).reshape(-1, 1)
        sigma = torch.as_tensor(sigma, dtype=self.mean.dtype).reshape(-1, 1, 1)

        eye = torch.eye(self.dim, dtype=self.mean.dtype)
        covs = alpha[..., None] ** 2 * self.cov + sigma**2 * eye
        return MultivariateNormal(loc=alpha * self.mean, covariance_matrix=covs)


def _forward_matrices(ae: LinearAutoencoder, model: ObservationModel):
    op_matrix = model.op.matrix()
    return op_matrix, op_matrix @ ae.weight


def conjugate_posterior(prior: GaussianDist, ae: LinearAutoencoder, model: ObservationModel) -> GaussianDist:
    """Exact posterior of z for z ~ N(m, S), x = W z + b (noiseless decode), y = A x + N(0, sigma_y^2 I)."""
    if model.sigma_y <= 0:
        raise NumericError("The conjugate posterior needs a positive observation noise level")
    op_matrix, forward = _forward_matrices(ae, model)

    prior_precision = prior.precision()
    precision = prior_precision + forward.T @ forward / model.sigma_y**2
    precision_tril, info = torch.linalg.cholesky_ex(precision)
    if info.item() > 0:
        raise NumericError("Posterior precision is singular")

    rhs = prior_precision @ prior.mean + forward.T @ (model.y - op_matrix @ ae.bias) / model.sigma_y**2
    mean = torch.cholesky_solve(rhs[:, None], precision_tril).squeeze(-1)
    cov = torch.cholesky_inverse(precision_tril)

    return GaussianDist(mean=mean, cov=0.5 * (cov + cov.T))


def map_point(
    prior: GaussianDist,
    ae: LinearAutoencoder,
    model: ObservationModel,
    lambda_hat: float,
    prior_weight: float = 0.0,
) -> Tensor:
    """Normal-equation minimizer of the data objective with the projection frozen.

    prior_weight=1 with lambda_hat=0 gives the conjugate posterior mean.
    """
    if model.sigma_y <= 0:
        raise NumericError("The MAP point needs a positive observation noise level")
    op_matrix, forward = _forward_matrices(ae, model)
    weight, bias = ae.weight, ae.bias

    # x - D(E(x)) = M x - W E_b - b, with M = I - W E_W
    projection_gap = torch.eye(ae.pixel_dim, dtype=weight.dtype) - weight @ ae.encoder.weight
    offset = projection_gap @ bias - weight @ ae.encoder.bias - bias

    hessian = forward.T @ forward / model.sigma_y**2 + lambda_hat * weight.T @ projection_gap @ weight
    rhs = forward.T @ (model.y - op_matrix @ bias) / model.sigma_y**2 - lambda_hat * weight.T @ offset
    if prior_weight:
        prior_precision = prior.precision()
        hessian = hessian + prior_weight * prior_precision
        rhs = rhs + prior_weight * prior_precision @ prior.mean

    if torch.linalg.matrix_rank(hessian, hermitian=False).item() < ae.latent_dim:
        raise NumericError("Normal equations are rank deficient: the observation does not determine the latent")
    return torch.linalg.solve(hessian, rhs)


def gaussian_kl(q: GaussianDist, p: GaussianDist) -> Tensor:
    if q.dim != p.dim:
        raise ShapeError(f"Cannot compare Gaussians of dimension {q.dim} and {p.dim}")
    return kl_divergence(q.distribution(), p.distribution())


def _quadrature_nodes(sched: Schedule, c: float, n_nodes: int):
    check_weighting_constant(c)
    if n_nodes < 2:
        raise DomainError(f"Quadrature needs at least 2 nodes, got {n_nodes}")

    nodes = torch.linspace(0.0, float(sched.T), n_nodes)
    alpha, sigma = sched.marginal_coefficients(nodes)
    return nodes, alpha, sigma, c * sigma**2 / alpha


def weighted_kl(q: GaussianDist, p: GaussianDist, sched: Schedule, c: float, n_nodes: int = 200) -> Tensor:
    """Trapezoidal rule for int_0^T w(s) KL(q_s || p_s) ds with both Gaussians pushed through the kernel."""
    if q.dim != p.dim:
        raise ShapeError(f"Cannot compare Gaussians of dimension {q.dim} and {p.dim}")
    nodes, alpha, sigma, weights = _quadrature_nodes(sched, c, n_nodes)

    kl = kl_divergence(q.diffused_distribution(alpha, sigma), p.diffused_distribution(alpha, sigma))
    return torch.trapezoid(weights * kl, nodes)


def _grid_kl(q: GaussianMixture, p: MultivariateNormal, num_points: int) -> Tensor:
    """KL(q || p) by tensor-product trapezoidal quadrature on a box covering both densities."""
    q_mean, q_cov = q.moments()
    spread = 10.0 * torch.sqrt(torch.maximum(torch.diagonal(q.covs, dim1=-2, dim2=-1).max(dim=0).values, p.variance))
    spread = spread + (q.means - q_mean).abs().max(dim=0).values
    lower = torch.minimum(q_mean, p.mean) - spread
    upper = torch.maximum(q_mean, p.mean) + spread

    axes = [torch.linspace(lo.item(), hi.item(), num_points) for lo, hi in zip(lower, upper)]
    points = torch.stack(torch.meshgrid(*axes, indexing="ij"), dim=-1)

    log_q = q.log_density(points)
    integrand = torch.exp(log_q) * (log_q - p.log_prob(points))
    for axis in reversed(axes):
        integrand = torch.trapezoid(integrand, axis, dim=-1)
    return integrand


def weighted_kl_mixture(
    q: GaussianMixture,
    p: GaussianDist,
    sched: Schedule,
    c: float,
    n_nodes: int = 200,
    num_points: Optional[int] = None,
) -> Tensor:
    """Weighted KL for a Gaussian-mixture first argument, by grid quadrature in latent dimension 1 or 2."""
    if q.dim != p.dim:
        raise ShapeError(f"Cannot compare distributions of dimension {q.dim} and {p.dim}")
    if q.dim > 2:
        raise DomainError(f"Grid quadrature is limited to dimension <= 2, got {q.dim}")
    if num_points is None:
        num_points = 2001 if q.dim == 1 else 201

    nodes, alpha, sigma, weights = _quadrature_nodes(sched, c, n_nodes)
    targets = p.diffused_distribution(alpha, sigma)

    eye = torch.eye(q.dim, dtype=q.means.dtype)
    kl = torch.stack(
        [
            _grid_kl(
                GaussianMixture(q.weights, a * q.means, a**2 * q.covs + sig**2 * eye),
                MultivariateNormal(loc=targets.loc[k], covariance_matrix=targets.covariance_matrix[k]),
                num_points,
            )
            for k, (a, sig) in enumerate(zip(alpha.tolist(), sigma.tolist()))
        ]
    )
    return torch.trapezoid(weights * kl, nodes)
