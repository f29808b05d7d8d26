import logging
from typing import Optional, Sequence, Tuple, Union

import torch
from torch import Tensor
from torch.distributions import Categorical, MixtureSameFamily, MultivariateNormal

from dwgf.errors import ConfigError, DomainError, NumericError, ShapeError
from dwgf.modules.schedule import Schedule

pylogger = logging.getLogger(__name__)

ArrayLike = Union[Tensor, Sequence]


class GaussianMixture:
    """Closed-form latent prior: sum_k w_k N(m_k, S_k).

    Stands in for a pretrained diffusion prior: pushing a Gaussian mixture through the
    forward kernel gives another Gaussian mixture, so the diffused density and its score
    are exact at every diffusion time.

    Weights need only be nonnegative and sum to one. Zero-weight components are kept but never sampled.
    """

    def __init__(self, weights: ArrayLike, means: ArrayLike, covs: ArrayLike):
        dtype = torch.get_default_dtype()
        weights = torch.as_tensor(weights, dtype=dtype)
        means = torch.as_tensor(means, dtype=dtype)
        covs = torch.as_tensor(covs, dtype=dtype)

        if weights.dim() != 1 or means.dim() != 2 or covs.dim() != 3:
            raise ShapeError(
                "Expected weights (K,), means (K, d) and covs (K, d, d), got "
                f"{tuple(weights.shape)}, {tuple(means.shape)}, {tuple(covs.shape)}"
            )
        num_components, dim = means.shape
        if weights.shape[0] != num_components or covs.shape != (num_components, dim, dim):
            raise ShapeError(
                f"Inconsistent mixture shapes: {tuple(weights.shape)}, {tuple(means.shape)}, {tuple(covs.shape)}"
            )

        if torch.any(weights < 0) or abs(weights.sum().item() - 1.0) > 1e-12:
            raise ConfigError("weights", reason=f"must be nonnegative and sum to 1, got {weights.tolist()}")
        if not torch.allclose(covs, covs.transpose(-1, -2), rtol=1e-12, atol=1e-12):
            raise ConfigError("covs", reason="covariance matrices must be symmetric")

        scale_tril, info = torch.linalg.cholesky_ex(covs)
        if torch.any(info > 0):
            bad = torch.nonzero(info > 0).flatten().tolist()
            raise ConfigError("covs", reason=f"covariance of component(s) {bad} is not positive definite")

        self.weights = weights
        self.means = means
        self.covs = covs
        self.scale_tril = scale_tril

    @classmethod
    def gaussian(cls, mean: ArrayLike, cov: ArrayLike) -> "GaussianMixture":
        mean = torch.as_tensor(mean, dtype=torch.get_default_dtype())
        cov = torch.as_tensor(cov, dtype=torch.get_default_dtype())
        return cls(weights=torch.ones(1), means=mean[None], covs=cov[None])

    @classmethod
    def generated(
        cls, dim: int, num_components: int, spread: float = 2.0, scale: float = 1.0, seed: int = 0
    ) -> "GaussianMixture":
        """Equal-weight mixture with means spread * N(0, I) drawn from `seed` and covariances scale * I."""
        if dim < 1 or num_components < 1:
            raise ConfigError("dim", "num_components", reason="must be positive")
        if not scale > 0:
            raise ConfigError("scale", reason=f"must be positive, got {scale}")

        generator = torch.Generator().manual_seed(int(seed))
        means = spread * torch.randn(num_components, dim, generator=generator)
        covs = scale * torch.eye(dim).expand(num_components, dim, dim).clone()
        return cls(weights=torch.full((num_components,), 1.0 / num_components), means=means, covs=covs)

    @property
    def dim(self) -> int:
        return self.means.shape[-1]

    @property
    def num_components(self) -> int:
        return self.means.shape[0]

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(num_components={self.num_components}, dim={self.dim})"

    def distribution(self) -> MixtureSameFamily:
        return MixtureSameFamily(
            mixture_distribution=Categorical(probs=self.weights),
            component_distribution=MultivariateNormal(loc=self.means, scale_tril=self.scale_tril),
        )

    def diffused(self, sched: Schedule, s: int) -> "GaussianMixture":
        """Exact pushforward through N(alpha_s z, sigma_s^2 I): means alpha_s m_k, covs alpha_s^2 S_k + sigma_s^2 I."""
        alpha, sigma = sched.alpha_sigma(s)
        if alpha == 1.0 and sigma == 0.0:
            return self

        eye = torch.eye(self.dim, dtype=self.covs.dtype)
        return GaussianMixture(
            weights=self.weights,
            means=alpha * self.means,
            covs=alpha**2 * self.covs + sigma**2 * eye,
        )

    def _check_point(self, z: Tensor) -> Tensor:
        z = torch.as_tensor(z, dtype=self.means.dtype)
        if z.shape[-1] != self.dim:
            raise ShapeError(f"Expected points of dimension {self.dim}, got {z.shape[-1]}")
        if not torch.all(torch.isfinite(z)):
            raise NumericError("Non-finite point passed to the mixture prior")
        return z

    def log_density(self, z: Tensor) -> Tensor:
        z = self._check_point(z)
        return self.distribution().log_prob(z)

    def score(self, z: Tensor) -> Tensor:
        """Gradient of the log-density: sum_k r_k(z) * (-S_k^{-1} (z - m_k)) with r_k the responsibilities."""
        z = self._check_point(z)

        diff = z[..., None, :] - self.means  # ..., K, d
        component_log_probs = MultivariateNormal(loc=self.means, scale_tril=self.scale_tril).log_prob(z[..., None, :])
        responsibilities = torch.softmax(torch.log(self.weights) + component_log_probs, dim=-1)

        precision_diff = torch.cholesky_solve(diff[..., None], self.scale_tril).squeeze(-1)
        return -(responsibilities[..., None] * precision_diff).sum(dim=-2)

    def log_density_at_time(self, sched: Schedule, s: int, z: Tensor) -> Tensor:
        return self.diffused(sched, s).log_density(z)

    def score_at_time(self, sched: Schedule, s: int, z: Tensor) -> Tensor:
        return self.diffused(sched, s).score(z)

    def sample(self, count: int, generator: Optional[torch.Generator] = None) -> Tensor:
        """I.i.d. draws: component by weight, then mean + Cholesky factor @ standard normal."""
        if count < 1:
            raise DomainError(f"Sample count must be at least 1, got {count}")

        components = torch.multinomial(self.weights, count, replacement=True, generator=generator)
        noise = torch.randn(count, self.dim, generator=generator, dtype=self.means.dtype)

        return self.means[components] + (self.scale_tril[components] @ noise[..., None]).squeeze(-1)

    def moments(self) -> Tuple[Tensor, Tensor]:
        """Mean and covariance of the whole mixture."""
        mean = self.weights @ self.means
        outer = self.means[:, :, None] * self.means[:, None]
        second_moment = torch.einsum("k,kij->ij", self.weights, self.covs + outer)
        return mean, second_moment - torch.outer(mean, mean)
