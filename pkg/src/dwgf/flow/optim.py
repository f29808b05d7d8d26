import logging
from dataclasses import dataclass
from enum import auto
from typing import Optional

import torch
from backports.strenum import StrEnum
from torch import Tensor

from dwgf.errors import ConfigError, NumericError, ShapeError, parse_choice
from dwgf.flow.ensemble import ParticleEnsemble

pylogger = logging.getLogger(__name__)


class OptimizerName(StrEnum):
    EULER = auto()
    ADAM = auto()


class LRSchedule(StrEnum):
    CONSTANT = auto()
    COSINE = auto()


@dataclass(frozen=True)
class OptimizerConfig:
    name: OptimizerName = OptimizerName.ADAM
    # euler; None picks a step from the drift's Lipschitz bound
    step_size: Optional[float] = None
    # adam
    lr: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # None: cosine annealing over the sweep for adam, constant for euler
    schedule: Optional[LRSchedule] = None

    def __post_init__(self):
        object.__setattr__(self, "name", parse_choice(OptimizerName, "optimizer.name", self.name))
        if self.schedule is None:
            schedule = LRSchedule.COSINE if self.name == OptimizerName.ADAM else LRSchedule.CONSTANT
        else:
            schedule = parse_choice(LRSchedule, "optimizer.schedule", self.schedule)
        object.__setattr__(self, "schedule", schedule)

        if self.name == OptimizerName.EULER and self.step_size is not None and not self.step_size > 0:
            raise ConfigError("optimizer.step_size", reason=f"must be positive, got {self.step_size}")
        if self.name == OptimizerName.ADAM:
            if not self.lr > 0:
                raise ConfigError("optimizer.lr", reason=f"must be positive, got {self.lr}")
            if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
                raise ConfigError("optimizer.beta1", "optimizer.beta2", reason="must lie in [0, 1)")
            if not self.eps > 0:
                raise ConfigError("optimizer.eps", reason=f"must be positive, got {self.eps}")


@dataclass
class AdamState:
    m: Tensor
    v: Tensor
    t: int


class ParticleOptimizer:
    """Discretizes the particle ODE by handing the drift u + gamma * v to a torch optimizer as a gradient.

    euler: z <- z - step_size * g (plain SGD)
    adam:  z <- z - lr * m_hat / (sqrt(v_hat) + eps), with the usual bias-corrected moments

    Given the run length `num_steps`, the cosine schedule anneals the step from its initial value at the
    first diffusion time towards zero at the last one.
    """

    def __init__(self, ensemble: ParticleEnsemble, config: OptimizerConfig, num_steps: Optional[int] = None):
        self.ensemble = ensemble
        self.config = config

        params = [ensemble.particles]
        if config.name == OptimizerName.EULER:
            if config.step_size is None:
                raise ConfigError("optimizer.step_size", reason="resolve the automatic step size before building")
            self.optimizer = torch.optim.SGD(params, lr=config.step_size)
        else:
            self.optimizer = torch.optim.Adam(
                params, lr=config.lr, betas=(config.beta1, config.beta2), eps=config.eps
            )

        self.scheduler = None
        if config.schedule == LRSchedule.COSINE and num_steps is not None:
            self.scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(self.optimizer, T_max=max(num_steps, 1))

    @property
    def lr(self) -> float:
        return self.optimizer.param_groups[0]["lr"]

    def step(self, grads: Tensor, s: Optional[int] = None) -> ParticleEnsemble:
        particles = self.ensemble.particles
        if grads.shape != particles.shape:
            raise ShapeError(f"Drift shape {tuple(grads.shape)} does not match particles {tuple(particles.shape)}")

        finite = torch.isfinite(grads).all(dim=-1)
        if not torch.all(finite):
            bad = torch.nonzero(~finite).flatten().tolist()
            pylogger.error(f"Non-finite drift for particles {bad} at step {self.ensemble.step} (s={s})")
            raise NumericError("Non-finite drift", step=self.ensemble.step, s=s, particle=bad[0])

        particles.grad = grads.detach().clone()
        self.optimizer.step()
        particles.grad = None
        if self.scheduler is not None:
            self.scheduler.step()

        self.ensemble.step += 1
        self.ensemble.check_finite(s=s)
        return self.ensemble

    @property
    def state(self) -> Optional[AdamState]:
        if self.config.name != OptimizerName.ADAM:
            return None

        param_state = self.optimizer.state.get(self.ensemble.particles)
        if not param_state:
            return None
        return AdamState(
            m=param_state["exp_avg"].clone(),
            v=param_state["exp_avg_sq"].clone(),
            t=int(param_state["step"]),
        )
