"""Built-in property suites exposed by `dwgf verify`.

Each suite builds its own seeded instances and returns one `PropertyCheck` per property with the
measured quantity next to the threshold it is held to.
"""
import logging
from dataclasses import dataclass
from enum import auto
from typing import Callable, Dict, List, Optional, Sequence

import torch
from backports.strenum import StrEnum
from torch import Tensor

from dwgf.flow.drift import data_drift, reg_drift
from dwgf.flow.engine import FlowConfig, Problem, run
from dwgf.flow.ensemble import log_kde
from dwgf.flow.optim import OptimizerConfig
from dwgf.modules.autoencoder import exact_encoder, pseudo_inverse_encoder, random_decoder_weight
from dwgf.modules.observation import ForwardOperator, observe
from dwgf.modules.prior import GaussianMixture
from dwgf.modules.schedule import Schedule
from dwgf.utils.metrics import ensemble_stats
from dwgf.utils.oracles import GaussianDist, gaussian_kl, weighted_kl, weighted_kl_mixture
from dwgf.utils.utils import central_difference, make_generator, relative_error

pylogger = logging.getLogger(__name__)


class Suite(StrEnum):
    GRADIENTS = auto()
    THEOREM1 = auto()
    FIXEDPOINT = auto()
    REPARAM = auto()


@dataclass
class PropertyCheck:
    name: str
    measured: float
    threshold: float
    passed: bool


def bimodal_prior(dim: int = 2, offset: float = 2.0) -> GaussianMixture:
    means = torch.zeros(2, dim)
    means[0, 0], means[1, 0] = -offset, offset
    return GaussianMixture(weights=[0.5, 0.5], means=means, covs=torch.eye(dim).expand(2, dim, dim).clone())


def make_linear_problem(
    seed: int = 0,
    latent_dim: int = 2,
    pixel_dim: int = 8,
    keep: Optional[Sequence[int]] = None,
    sigma_y: float = 1e-3,
    rho: float = 1e-3,
    exact: bool = True,
    prior: Optional[GaussianMixture] = None,
    schedule: Optional[Schedule] = None,
) -> Problem:
    """Seeded linear-Gaussian inverse problem: random decoder, mask operator, ground truth drawn from the prior."""
    generator = make_generator(seed)
    prior = prior if prior is not None else bimodal_prior(latent_dim)

    weight = random_decoder_weight(latent_dim, pixel_dim, generator)
    bias = 0.1 * torch.randn(pixel_dim, generator=generator)
    if exact:
        mean, cov = prior.moments()
        ae = exact_encoder(weight, bias, rho, mean, cov)
    else:
        ae = pseudo_inverse_encoder(weight, bias, rho)

    op = ForwardOperator.from_keep(pixel_dim, keep) if keep is not None else ForwardOperator.identity(pixel_dim)
    x_true = ae.decode(prior.sample(1, generator=generator)[0])
    model = observe(op, x_true, sigma_y, generator=generator)

    return Problem(
        schedule=schedule if schedule is not None else Schedule(),
        prior=prior,
        autoencoder=ae,
        observation=model,
        x_true=x_true,
    )


def monte_carlo_objective(
    problem: Problem,
    snapshot: Tensor,
    index: int,
    s: int,
    eps: Tensor,
    nu: Tensor,
    gamma: float,
    lambda_hat: float,
    c: float,
) -> Callable[[Tensor], Tensor]:
    """Scalar objective of particle `index` whose gradient is the drift u + gamma * v.

    Noises are frozen, the KDE centers stay at the snapshot and so does the data-consistency target D(E(x)).
    """
    ae, model, sched, prior = problem.autoencoder, problem.observation, problem.schedule, problem.prior
    lam = lambda_hat * ae.rho**2
    alpha, sigma = sched.alpha_sigma(s)
    target = ae.decode(ae.encode(ae.decode(snapshot[index], eps[index])))

    def objective(z: Tensor) -> Tensor:
        x0 = ae.decode(z, eps[index])
        value = -model.log_likelihood(x0) + 0.5 * lam * ((x0 - target) ** 2).sum() / ae.rho**2
        if gamma > 0:
            zs = alpha * z + sigma * nu[index]
            log_ratio = log_kde(snapshot, sched, s, zs) - prior.log_density_at_time(sched, s, zs)
            value = value + gamma * sched.weight(s, c) * log_ratio
        return value

    return objective


def check_gradients(seed: int = 0, num_particles: int = 8, threshold: float = 1e-4) -> List[PropertyCheck]:
    problem = make_linear_problem(seed=seed, latent_dim=2, pixel_dim=4, keep=[0, 2, 3], sigma_y=0.5, rho=0.1)
    generator = make_generator(seed + 1)
    gamma, lambda_hat, c = 0.7, 0.3, 0.5
    ae = problem.autoencoder

    snapshot = problem.prior.sample(num_particles, generator=generator)
    errors = []
    for s in (problem.schedule.T // 10, problem.schedule.T // 2, problem.schedule.T):
        eps = torch.randn(num_particles, ae.pixel_dim, generator=generator)
        nu = torch.randn(num_particles, ae.latent_dim, generator=generator)

        u = data_drift(ae, problem.observation, snapshot, eps, lambda_hat * ae.rho**2)
        v = reg_drift(snapshot, problem.prior, problem.schedule, s, nu, c)
        drift = u + gamma * v

        for i in range(num_particles):
            objective = monte_carlo_objective(problem, snapshot, i, s, eps, nu, gamma, lambda_hat, c)
            errors.append(relative_error(drift[i], central_difference(objective, snapshot[i], step=1e-5)))

    measured = max(errors)
    name = "drift equals finite-difference gradient (max rel. error)"
    return [PropertyCheck(name, measured, threshold, measured < threshold)]


def random_gaussian(generator: torch.Generator, dim: int) -> GaussianDist:
    factor = 0.5 * torch.randn(dim, dim, generator=generator)
    return GaussianDist(mean=torch.randn(dim, generator=generator), cov=factor @ factor.T + 0.5 * torch.eye(dim))


def check_weighted_kl(
    seed: int = 0,
    num_pairs: int = 200,
    num_mixture_pairs: int = 10,
    c: float = 0.5,
) -> List[PropertyCheck]:
    generator = make_generator(seed)
    sched = Schedule()

    min_value = float("inf")
    convexity_gap = -float("inf")
    mismatches = 0
    for k in range(num_pairs):
        p = random_gaussian(generator, 2)
        q = p if k % 10 == 0 else random_gaussian(generator, 2)
        other_mean = torch.randn(2, generator=generator)

        value = weighted_kl(q, p, sched, c).item()
        min_value = min(min_value, value)

        # midpoint along a mean path: every point of the path is Gaussian
        q_far = GaussianDist(other_mean, q.cov)
        q_mid = GaussianDist(0.5 * (q.mean + other_mean), q.cov)
        chord = 0.5 * (value + weighted_kl(q_far, p, sched, c).item())
        convexity_gap = max(convexity_gap, weighted_kl(q_mid, p, sched, c).item() - chord)

        mismatches += int((value < 1e-6) != (gaussian_kl(q, p).item() < 1e-6))

    # midpoint along the mixture path (q1 + q2) / 2, by grid quadrature in one dimension
    mixture_gap = -float("inf")
    for _ in range(num_mixture_pairs):
        p, q1, q2 = (random_gaussian(generator, 1) for _ in range(3))
        mixture = GaussianMixture(
            weights=[0.5, 0.5], means=torch.stack([q1.mean, q2.mean]), covs=torch.stack([q1.cov, q2.cov])
        )
        ends = [weighted_kl_mixture(q.as_mixture(), p, sched, c).item() for q in (q1, q2)]
        middle = weighted_kl_mixture(mixture, p, sched, c).item()
        mixture_gap = max(mixture_gap, (middle - 0.5 * sum(ends)) / max(abs(0.5 * sum(ends)), 1e-12))

    return [
        PropertyCheck("weighted KL is nonnegative (min value)", min_value, -1e-12, min_value > -1e-12),
        PropertyCheck("midpoint convexity along mean paths (max gap)", convexity_gap, 1e-9, convexity_gap <= 1e-9),
        PropertyCheck("midpoint convexity along mixture paths (max rel. gap)", mixture_gap, 1e-6, mixture_gap <= 1e-6),
        PropertyCheck("weighted KL vanishes iff KL vanishes (mismatches)", float(mismatches), 0.0, mismatches == 0),
    ]


def fixed_point_problem(num_particles: int = 512, optimizer: Optional[OptimizerConfig] = None, seed: int = 0):
    """No observation, identity autoencoder, single-Gaussian prior: the flow should leave the prior in place.

    The default optimizer is the default of every run, Adam with a cosine-annealed step.
    """
    prior = GaussianMixture.gaussian(mean=[1.0, -1.0], cov=[[1.0, 0.3], [0.3, 0.5]])
    problem = Problem(
        schedule=Schedule(),
        prior=prior,
        autoencoder=pseudo_inverse_encoder(torch.eye(2), torch.zeros(2), rho=1e-3),
        observation=None,
    )
    config = FlowConfig(
        gamma=1.0,
        lambda_hat=0.0,
        num_particles=num_particles,
        optimizer=optimizer if optimizer is not None else OptimizerConfig(),
        seed=seed,
        progress_bar=False,
    )
    return problem, config


def check_fixed_point(
    num_particles: int = 512, optimizer: Optional[OptimizerConfig] = None, seed: int = 0
) -> List[PropertyCheck]:
    problem, config = fixed_point_problem(num_particles=num_particles, optimizer=optimizer, seed=seed)
    result = run(problem, config)

    mean, cov = ensemble_stats(result.particles)
    prior_mean, prior_cov = problem.prior.moments()
    mean_error = (mean - prior_mean).norm().item()
    cov_error = relative_error(cov, prior_cov)

    return [
        PropertyCheck("ensemble mean stays at the prior mean (distance)", mean_error, 0.1, mean_error < 0.1),
        PropertyCheck("ensemble covariance stays at the prior (rel. Frobenius)", cov_error, 0.15, cov_error < 0.15),
    ]


def check_reparameterization(seed: int = 0, num_pairs: int = 100, threshold: float = 1e-12) -> List[PropertyCheck]:
    """The log-density term of the decoded distribution has zero pathwise gradient under shared noise.

    With x = D(z) + rho * eps, log N(x; D(z), rho^2 I) = -||eps||^2 / 2 + const, whatever z is.
    """
    generator = make_generator(seed)
    ae = pseudo_inverse_encoder(random_decoder_weight(2, 4, generator), torch.randn(4, generator=generator), 1e-3)

    largest = 0.0
    for _ in range(num_pairs):
        z = torch.randn(ae.latent_dim, generator=generator).requires_grad_(True)
        eps = torch.randn(ae.pixel_dim, generator=generator)

        x = ae.decode(z, eps)
        log_q = -0.5 * ((x - ae.decode(z)) ** 2).sum() / ae.rho**2
        (grad,) = torch.autograd.grad(log_q, z)
        largest = max(largest, grad.abs().max().item())

    name = "decoded log-density term has zero gradient (max |grad|)"
    return [PropertyCheck(name, largest, threshold, largest < threshold)]


SUITES: Dict[Suite, Callable[[], List[PropertyCheck]]] = {
    Suite.GRADIENTS: check_gradients,
    Suite.THEOREM1: check_weighted_kl,
    Suite.FIXEDPOINT: check_fixed_point,
    Suite.REPARAM: check_reparameterization,
}


def run_suite(suite: str) -> List[PropertyCheck]:
    suite = Suite(suite)
    pylogger.info(f"Running the <{suite}> suite")
    return SUITES[suite]()
