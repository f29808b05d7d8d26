import logging
import math
from typing import Optional, Union

import torch
from torch import Tensor, nn

from dwgf.errors import DegenerateKernelError, DomainError, NumericError, ShapeError
from dwgf.modules.prior import GaussianMixture
from dwgf.modules.schedule import Schedule

pylogger = logging.getLogger(__name__)


class ParticleEnsemble:
    """N latent particles z_0^(i), the empirical approximation of the latent posterior.

    Particles live in a leaf parameter so that torch optimizers can update them in place.
    """

    def __init__(self, particles: Tensor, step: int = 0):
        particles = torch.as_tensor(particles, dtype=torch.get_default_dtype())
        if particles.dim() != 2:
            raise ShapeError(f"Particles must be an (N, d) array, got shape {tuple(particles.shape)}")
        if particles.shape[0] < 1:
            raise DomainError("An ensemble needs at least one particle")

        self.particles = nn.Parameter(particles.detach().clone())
        self.step = step
        self.check_finite()

    @classmethod
    def from_prior(cls, prior: GaussianMixture, count: int, generator: Optional[torch.Generator] = None):
        return cls(prior.sample(count, generator=generator))

    @property
    def num_particles(self) -> int:
        return self.particles.shape[0]

    @property
    def dim(self) -> int:
        return self.particles.shape[1]

    def __len__(self) -> int:
        return self.num_particles

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(num_particles={self.num_particles}, dim={self.dim}, step={self.step})"

    def snapshot(self) -> Tensor:
        """Frozen copy of the current positions."""
        return self.particles.detach().clone()

    def check_finite(self, s: Optional[int] = None) -> None:
        finite = torch.isfinite(self.particles.detach()).all(dim=-1)
        if not torch.all(finite):
            particle = int(torch.nonzero(~finite)[0].item())
            raise NumericError("Non-finite particle position", step=self.step, s=s, particle=particle)


def as_centers(ensemble: Union[ParticleEnsemble, Tensor]) -> Tensor:
    if isinstance(ensemble, ParticleEnsemble):
        return ensemble.snapshot()
    if ensemble.dim() != 2 or ensemble.shape[0] < 1:
        raise ShapeError(f"Expected a nonempty (N, d) particle array, got shape {tuple(ensemble.shape)}")
    return ensemble.detach()


def _kernel_terms(ensemble: Union[ParticleEnsemble, Tensor], sched: Schedule, s: int, query: Tensor):
    centers = as_centers(ensemble)
    if query.shape[-1] != centers.shape[-1]:
        raise ShapeError(f"Query dimension {query.shape[-1]} does not match particle dimension {centers.shape[-1]}")

    alpha, sigma = sched.alpha_sigma(s)
    if sigma == 0.0:
        raise DegenerateKernelError(f"The forward kernel at s={s} has zero variance")

    diff = query[..., None, :] - alpha * centers  # ..., N, d
    logits = -0.5 * (diff**2).sum(dim=-1) / sigma**2
    return diff, logits, sigma


def kde_score(ensemble: Union[ParticleEnsemble, Tensor], sched: Schedule, s: int, query: Tensor) -> Tensor:
    """Score of (1/N) sum_j N(. ; alpha_s z_0^(j), sigma_s^2 I), the particles pushed through the forward kernel."""
    diff, logits, sigma = _kernel_terms(ensemble, sched, s, query)
    responsibilities = torch.softmax(logits, dim=-1)

    return -(responsibilities[..., None] * diff).sum(dim=-2) / sigma**2


def log_kde(ensemble: Union[ParticleEnsemble, Tensor], sched: Schedule, s: int, query: Tensor) -> Tensor:
    diff, logits, sigma = _kernel_terms(ensemble, sched, s, query)
    num_particles, dim = diff.shape[-2:]

    normalizer = math.log(num_particles) + 0.5 * dim * math.log(2 * math.pi * sigma**2)
    return torch.logsumexp(logits, dim=-1) - normalizer
