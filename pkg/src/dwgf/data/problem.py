"""Experiment configuration -> validated problem.

Single components are `_target_` nodes built with `hydra.utils.instantiate`; the constraints between
components are checked here. Failures are raised as `ConfigError` on the dotted path of the field(s).
"""
import logging
from contextlib import contextmanager
from dataclasses import dataclass
from enum import auto
from pathlib import Path
from typing import Any, Iterator, Optional, Sequence, Tuple, Type, TypeVar

import torch
from backports.strenum import StrEnum
from hydra import compose, initialize_config_dir
from hydra.errors import HydraException, InstantiationException
from hydra.utils import instantiate
from omegaconf import DictConfig, OmegaConf
from omegaconf.errors import OmegaConfBaseException
from torch import Tensor

from dwgf.data.io_utils import load_vector
from dwgf.errors import ConfigError, DomainError, DWGFError, NumericError, ShapeError, parse_choice
from dwgf.flow.engine import FlowConfig, Problem
from dwgf.modules.autoencoder import LinearAutoencoder, exact_encoder, pseudo_inverse_encoder, random_decoder_weight
from dwgf.modules.observation import ForwardOperator, ObservationModel, observe
from dwgf.modules.prior import GaussianMixture
from dwgf.modules.schedule import Schedule
from dwgf.utils.utils import make_generator

pylogger = logging.getLogger(__name__)

_REQUIRED = object()

T = TypeVar("T")


class Source(StrEnum):
    GENERATE = auto()
    PRIOR = auto()
    FILE = auto()
    NONE = auto()


class Metric(StrEnum):
    PSNR = auto()
    RESIDUAL = auto()
    SPREAD = auto()


@dataclass
class Experiment:
    problem: Problem
    flow: FlowConfig
    cfg: DictConfig

    @property
    def output_dir(self) -> Path:
        return Path(self.cfg.output.dir)

    @property
    def metrics(self) -> Sequence[Metric]:
        return [Metric(metric) for metric in self.cfg.output.metrics]


def load_config(config_path: str, overrides: Sequence[str] = ()) -> DictConfig:
    """Compose an experiment file (and the config groups next to it) with dotted `key=value` overrides."""
    path = Path(config_path).resolve()
    if not path.is_file():
        raise ConfigError("config", reason=f"no such file {config_path}")

    try:
        with initialize_config_dir(config_dir=str(path.parent), version_base=None):
            cfg = compose(config_name=path.stem, overrides=list(overrides))
    except (HydraException, OmegaConfBaseException) as err:
        raise ConfigError("config", reason=str(err)) from err

    return cfg


@contextmanager
def config_block(*paths: str) -> Iterator[None]:
    """Re-raise errors of the model components as `ConfigError`s rooted at `paths`."""
    try:
        yield
    except ConfigError as err:
        prefix = paths[0]
        fields = (
            field if field == prefix or field.startswith(f"{prefix}.") else f"{prefix}.{field}" for field in err.fields
        )
        raise ConfigError(*fields, reason=err.reason) from err
    except (ShapeError, DomainError, NumericError) as err:
        raise ConfigError(*paths, reason=str(err)) from err


def _get(cfg: DictConfig, key: str, default: Any = _REQUIRED) -> Any:
    value = OmegaConf.select(cfg, key, default=None if default is _REQUIRED else default)
    if value is None and default is _REQUIRED:
        raise ConfigError(key, reason="is required")
    return value


def _tensor(value: Any) -> Tensor:
    return torch.as_tensor(OmegaConf.to_container(value) if OmegaConf.is_config(value) else value)


def build(node: DictConfig, expected: Type[T], *paths: str, **kwargs) -> T:
    """Instantiate a `_target_` node, re-raising the component's own errors on `paths`."""
    pylogger.debug(f"Instantiating <{node.get('_target_')}>")
    with config_block(*paths):
        try:
            built = instantiate(node, _convert_="all", **kwargs)
        except InstantiationException as err:
            cause = err
            while isinstance(cause, InstantiationException) and cause.__cause__ is not None:
                cause = cause.__cause__
            if isinstance(cause, DWGFError):
                raise cause from err
            raise ConfigError(*paths, reason=str(err)) from err

    if not isinstance(built, expected):
        raise ConfigError(*paths, reason=f"expected a `_target_` building {expected.__name__}, got {type(built)}")
    return built


def build_schedule(cfg: DictConfig) -> Schedule:
    return build(cfg.schedule, Schedule, "schedule")


def build_prior(cfg: DictConfig) -> GaussianMixture:
    return build(cfg.prior, GaussianMixture, "prior")


def build_autoencoder(cfg: DictConfig, prior: GaussianMixture) -> LinearAutoencoder:
    pixel_dim, rho = _get(cfg, "autoencoder.pixel_dim"), _get(cfg, "autoencoder.rho")

    weight = _get(cfg, "autoencoder.weight", None)
    if weight is not None:
        weight = _tensor(weight).to(torch.get_default_dtype())
        if weight.dim() != 2 or weight.shape[0] != pixel_dim:
            raise ConfigError(
                "autoencoder.weight",
                "autoencoder.pixel_dim",
                reason=f"decoder weight of shape {tuple(weight.shape)} does not produce signals of length {pixel_dim}",
            )
        if weight.shape[1] != prior.dim:
            raise ConfigError(
                "autoencoder.weight",
                "prior.means",
                reason=f"decoder latent dimension {weight.shape[1]} does not match the prior dimension {prior.dim}",
            )
        bias = _get(cfg, "autoencoder.bias", None)
        bias = torch.zeros(pixel_dim) if bias is None else _tensor(bias).to(torch.get_default_dtype())
    else:
        generator = make_generator(_get(cfg, "autoencoder.seed"))
        with config_block("autoencoder"):
            weight = random_decoder_weight(prior.dim, pixel_dim, generator)
        bias = _get(cfg, "autoencoder.bias_scale", 0.1) * torch.randn(pixel_dim, generator=generator)

    with config_block("autoencoder"):
        if _get(cfg, "autoencoder.exact_encoder", True):
            mean, cov = prior.moments()
            return exact_encoder(weight, bias, rho, mean, cov)
        return pseudo_inverse_encoder(weight, bias, rho)


def build_operator(cfg: DictConfig, pixel_dim: int) -> ForwardOperator:
    op_cfg = "observation.operator"
    op_pixel_dim = _get(cfg, f"{op_cfg}.pixel_dim", pixel_dim)
    if op_pixel_dim != pixel_dim:
        raise ConfigError(
            "autoencoder.pixel_dim",
            f"{op_cfg}.pixel_dim",
            reason=f"the decoder produces length {pixel_dim}, the operator acts on length {op_pixel_dim}",
        )

    return build(cfg.observation.operator, ForwardOperator, op_cfg, pixel_dim=pixel_dim)


def build_observation(
    cfg: DictConfig, prior: GaussianMixture, ae: LinearAutoencoder
) -> Tuple[Optional[ObservationModel], Optional[Tensor]]:
    if not _get(cfg, "observation.enabled", True):
        return None, None

    op = build_operator(cfg, ae.pixel_dim)
    sigma_y = _get(cfg, "observation.sigma_y")
    if not sigma_y > 0:
        raise ConfigError("observation.sigma_y", reason=f"the likelihood needs a positive noise level, got {sigma_y}")

    truth_source = parse_choice(Source, "observation.x_true.source", _get(cfg, "observation.x_true.source", "none"))
    if truth_source == Source.PRIOR:
        generator = make_generator(_get(cfg, "observation.x_true.seed"))
        x_true = ae.decode(prior.sample(1, generator=generator)[0])
    elif truth_source == Source.FILE:
        x_true = load_vector(_get(cfg, "observation.x_true.file"))
        if x_true.shape != (ae.pixel_dim,):
            raise ConfigError(
                "observation.x_true.file",
                "autoencoder.pixel_dim",
                reason=f"ground truth of length {x_true.shape[0]}, signals have length {ae.pixel_dim}",
            )
    elif truth_source == Source.NONE:
        x_true = None
    else:
        raise ConfigError("observation.x_true.source", reason=f"cannot take the ground truth from {truth_source}")

    y_source = parse_choice(Source, "observation.y.source", _get(cfg, "observation.y.source"))
    if y_source == Source.GENERATE:
        if x_true is None:
            raise ConfigError(
                "observation.y.source", "observation.x_true.source", reason="generating y needs a ground truth"
            )
        model = observe(op, x_true, sigma_y, generator=make_generator(_get(cfg, "observation.y.seed")))
    elif y_source == Source.FILE:
        y = load_vector(_get(cfg, "observation.y.file"))
        if y.shape != (op.output_dim,):
            raise ConfigError(
                "observation.y.file",
                "observation.operator",
                reason=f"observation of length {y.shape[0]}, the operator outputs length {op.output_dim}",
            )
        model = ObservationModel(op, y, sigma_y)
    else:
        raise ConfigError("observation.y.source", reason=f"cannot take the observation from {y_source}")

    return model, x_true


def build_flow_config(cfg: DictConfig) -> FlowConfig:
    return build(cfg.flow, FlowConfig, "flow")


def build_problem(cfg: DictConfig) -> Experiment:
    """Validate an experiment config and build everything the flow needs."""
    for metric in _get(cfg, "output.metrics", []):
        if metric not in {member.value for member in Metric}:
            raise ConfigError("output.metrics", reason=f"unknown metric {metric!r}")
    _get(cfg, "output.dir")

    flow = build_flow_config(cfg)
    schedule = build_schedule(cfg)
    prior = build_prior(cfg)
    ae = build_autoencoder(cfg, prior)
    observation, x_true = build_observation(cfg, prior, ae)

    problem = Problem(schedule=schedule, prior=prior, autoencoder=ae, observation=observation, x_true=x_true)
    pylogger.debug(f"Built {problem.prior}, {problem.autoencoder}, observation={problem.observation}")
    return Experiment(problem=problem, flow=flow, cfg=cfg)
