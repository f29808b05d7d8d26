import logging
from dataclasses import dataclass, field, replace
from enum import auto
from typing import Dict, List, Optional

import torch
from backports.strenum import StrEnum
from torch import Tensor
from tqdm import tqdm

from dwgf.errors import ConfigError, NumericError, ShapeError, parse_choice
from dwgf.flow.drift import data_drift, data_objective, reg_drift, reg_objective
from dwgf.flow.ensemble import ParticleEnsemble
from dwgf.flow.optim import OptimizerConfig, OptimizerName, ParticleOptimizer
from dwgf.modules.autoencoder import LinearAutoencoder
from dwgf.modules.observation import ObservationModel
from dwgf.modules.prior import GaussianMixture
from dwgf.modules.schedule import Schedule, check_weighting_constant

pylogger = logging.getLogger(__name__)


class TimeSampling(StrEnum):
    DETERMINISTIC = auto()
    UNIFORM = auto()


@dataclass(frozen=True)
class FlowConfig:
    gamma: float = 0.15
    # effective data-consistency weight: the drift uses lambda = lambda_hat * rho^2
    lambda_hat: float = 0.1
    c: float = 0.5
    num_particles: int = 4
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    seed: int = 0
    shared_decode_noise: bool = False
    time_sampling: TimeSampling = TimeSampling.DETERMINISTIC
    include_terminal_step: bool = False
    trace: bool = False
    keep_trajectory: bool = False
    progress_bar: bool = True

    def __post_init__(self):
        object.__setattr__(self, "time_sampling", parse_choice(TimeSampling, "flow.time_sampling", self.time_sampling))

        for name in ("gamma", "lambda_hat"):
            value = getattr(self, name)
            if not (value >= 0 and value != float("inf")):
                raise ConfigError(f"flow.{name}", reason=f"must be finite and nonnegative, got {value}")
        if self.num_particles < 1:
            raise ConfigError("flow.num_particles", reason=f"must be at least 1, got {self.num_particles}")
        try:
            check_weighting_constant(self.c)
        except ConfigError as err:
            raise ConfigError("flow.c", reason=err.reason) from err


@dataclass
class Problem:
    schedule: Schedule
    prior: GaussianMixture
    autoencoder: LinearAutoencoder
    observation: Optional[ObservationModel] = None
    x_true: Optional[Tensor] = None

    def __post_init__(self):
        if self.prior.dim != self.autoencoder.latent_dim:
            raise ShapeError(
                f"Prior dimension {self.prior.dim} does not match the autoencoder latent dimension "
                f"{self.autoencoder.latent_dim}"
            )
        if self.observation is not None and self.observation.op.pixel_dim != self.autoencoder.pixel_dim:
            raise ShapeError(
                f"Operator acts on signals of length {self.observation.op.pixel_dim}, "
                f"the decoder produces length {self.autoencoder.pixel_dim}"
            )
        if self.x_true is not None and self.x_true.shape != (self.autoencoder.pixel_dim,):
            raise ShapeError(f"Ground truth must have shape ({self.autoencoder.pixel_dim},)")


@dataclass
class FlowResult:
    particles: Tensor
    decoded: Tensor
    times: List[int]
    trajectory: Optional[Tensor] = None
    trace: List[Dict[str, float]] = field(default_factory=list)

    @property
    def num_steps(self) -> int:
        return len(self.times)


def drift_lipschitz_bound(problem: Problem, config: FlowConfig) -> float:
    """Upper bound on the Lipschitz constant of z -> u(z) + gamma * v(z) for the linear model.

    The data part is exact: || W^T (A^T A / sigma_y^2 + lambda_hat (I - W E_W)) W ||_2.
    The regularization part is bounded by gamma * c * (1 + largest prior precision).
    """
    ae = problem.autoencoder
    weight = ae.weight
    pixel_eye = torch.eye(ae.pixel_dim, dtype=weight.dtype)

    hessian = config.lambda_hat * weight.T @ (pixel_eye - weight @ ae.encoder.weight) @ weight
    if problem.observation is not None:
        forward = problem.observation.op.matrix() @ weight
        hessian = hessian + forward.T @ forward / problem.observation.sigma_y**2

    data_bound = torch.linalg.matrix_norm(hessian, ord=2).item()
    max_precision = (1.0 / torch.linalg.eigvalsh(problem.prior.covs).min()).item()

    return data_bound + config.gamma * config.c * (1.0 + max_precision)


class DWGFSampler:
    """Runs the diffusion-regularized particle flow for one problem.

    Each iteration k visits one diffusion time s, draws decoder noise eps^(i) and forward-kernel
    noise nu^(i), evaluates u + gamma * v for every particle against a frozen snapshot of the
    ensemble and applies a single optimizer step. A sampler owns its state: build one per run.
    """

    def __init__(self, problem: Problem, config: FlowConfig):
        self.problem = problem
        self.config = config

        optimizer = config.optimizer
        if optimizer.name == OptimizerName.EULER and optimizer.step_size is None:
            step_size = 0.5 / drift_lipschitz_bound(problem, config)
            pylogger.info(f"Automatic Euler step size: {step_size:.3e}")
            self.config = replace(config, optimizer=replace(optimizer, step_size=step_size))

        self.generator = torch.Generator().manual_seed(config.seed)

    def schedule_times(self) -> List[int]:
        sched = self.problem.schedule
        if self.config.time_sampling == TimeSampling.UNIFORM:
            times = torch.randint(1, sched.T + 1, (sched.T,), generator=self.generator).tolist()
        else:
            times = sched.sweep()

        if self.config.include_terminal_step:
            times.append(0)
        return times

    def _draw_noise(self, num_particles: int):
        ae = self.problem.autoencoder
        if self.config.shared_decode_noise:
            eps = torch.randn(ae.pixel_dim, generator=self.generator).expand(num_particles, -1)
        else:
            eps = torch.randn(num_particles, ae.pixel_dim, generator=self.generator)
        nu = torch.randn(num_particles, ae.latent_dim, generator=self.generator)
        return eps, nu

    def drifts(self, snapshot: Tensor, s: int, eps: Tensor, nu: Tensor):
        problem, config = self.problem, self.config
        lam = config.lambda_hat * problem.autoencoder.rho**2

        u = data_drift(problem.autoencoder, problem.observation, snapshot, eps, lam)
        if config.gamma > 0 and s > 0:
            v = reg_drift(snapshot, problem.prior, problem.schedule, s, nu, config.c)
        else:
            v = torch.zeros_like(u)
        return u, v

    def _trace_rows(
        self, step: int, s: int, lr: float, snapshot: Tensor, eps: Tensor, nu: Tensor, u: Tensor, v: Tensor
    ):
        problem, config = self.problem, self.config
        lam = config.lambda_hat * problem.autoencoder.rho**2

        likelihood, consistency = data_objective(problem.autoencoder, problem.observation, snapshot, eps, lam)
        if s > 0:
            regularization = reg_objective(snapshot, problem.prior, problem.schedule, s, nu, config.c)
        else:
            regularization = torch.zeros_like(likelihood)

        return [
            {
                "step": step,
                "s": s,
                "particle": i,
                "lr": lr,
                "likelihood": likelihood[i].item(),
                "consistency": consistency[i].item(),
                "regularization": regularization[i].item(),
                "u_norm": u[i].norm().item(),
                "v_norm": v[i].norm().item(),
            }
            for i in range(snapshot.shape[0])
        ]

    def run(self, initial_particles: Optional[Tensor] = None) -> FlowResult:
        problem, config = self.problem, self.config

        if initial_particles is None:
            ensemble = ParticleEnsemble.from_prior(problem.prior, config.num_particles, generator=self.generator)
        else:
            ensemble = ParticleEnsemble(initial_particles)
        times = self.schedule_times()
        optimizer = ParticleOptimizer(ensemble, config.optimizer, num_steps=len(times))

        pylogger.info(
            f"Running {len(times)} steps with {ensemble.num_particles} particles "
            f"(latent {problem.autoencoder.latent_dim}, pixel {problem.autoencoder.pixel_dim}), "
            f"optimizer <{config.optimizer.name}> with a {config.optimizer.schedule} schedule, "
            f"gamma={config.gamma}, lambda_hat={config.lambda_hat}"
        )

        trajectory = [ensemble.snapshot()] if config.keep_trajectory else None
        trace: List[Dict[str, float]] = []

        for step, s in enumerate(tqdm(times, desc="Flowing particles", disable=not config.progress_bar)):
            snapshot = ensemble.snapshot()
            eps, nu = self._draw_noise(ensemble.num_particles)

            try:
                u, v = self.drifts(snapshot, s, eps, nu)
            except NumericError as err:
                pylogger.error(f"Drift evaluation failed at step {step} (s={s}): {err.message}")
                raise NumericError(err.message, step=step, s=s, particle=err.particle) from err

            if config.trace:
                trace.extend(self._trace_rows(step, s, optimizer.lr, snapshot, eps, nu, u, v))

            optimizer.step(u + config.gamma * v, s=s)

            if trajectory is not None:
                trajectory.append(ensemble.snapshot())

        particles = ensemble.snapshot()
        return FlowResult(
            particles=particles,
            decoded=problem.autoencoder.decode(particles),
            times=times,
            trajectory=torch.stack(trajectory) if trajectory is not None else None,
            trace=trace,
        )


def run(problem: Problem, config: FlowConfig, initial_particles: Optional[Tensor] = None) -> FlowResult:
    return DWGFSampler(problem, config).run(initial_particles=initial_particles)
