import itertools
import logging
from pathlib import Path
from typing import Callable, Sequence, Tuple

import pytest
import torch
from hydra import compose, initialize
from omegaconf import DictConfig
from pytest import TempPathFactory
from pytorch_lightning import seed_everything

from dwgf.modules.autoencoder import pseudo_inverse_encoder
from dwgf.modules.prior import GaussianMixture
from dwgf.modules.schedule import Schedule
from dwgf.utils.verification import bimodal_prior

logging.basicConfig(force=True, level=logging.DEBUG)

seed_everything(42)

CONF_DIR = Path(__file__).parent.parent / "conf"


class FixedSchedule(Schedule):
    """Schedule stub returning the same (alpha, sigma) at every s >= 1."""

    def __init__(self, alpha: float = 0.8, sigma: float = 0.6, T: int = 10):
        super().__init__(T=T)
        self.alpha = alpha
        self.sigma = sigma

    def alpha_sigma(self, s: int) -> Tuple[float, float]:
        s = self.check_time(s)
        return (1.0, 0.0) if s == 0 else (self.alpha, self.sigma)


#
# Base configurations
#
@pytest.fixture(scope="package")
def compose_cfg(tmp_path_factory: TempPathFactory) -> Callable[..., DictConfig]:
    """Compose a shipped experiment with overrides, writing its outputs to a fresh temp folder."""
    storage_dir = tmp_path_factory.mktemp("dwgf_runs")
    counter = itertools.count()

    def _compose(config_name: str, overrides: Sequence[str] = ()) -> DictConfig:
        with initialize(config_path="../conf", version_base=None):
            cfg = compose(config_name=config_name, overrides=list(overrides))

        cfg.output.dir = str(storage_dir / f"{config_name}_{next(counter)}")
        cfg.flow.progress_bar = False
        return cfg

    return _compose


@pytest.fixture(scope="package")
def cfg(compose_cfg) -> DictConfig:
    return compose_cfg("inpainting")


#
# Model components
#
@pytest.fixture
def schedule() -> Schedule:
    return Schedule(T=999, beta_min=0.1, beta_max=20.0)


@pytest.fixture
def fixed_schedule() -> FixedSchedule:
    return FixedSchedule(alpha=0.8, sigma=0.6)


@pytest.fixture
def bimodal() -> GaussianMixture:
    return bimodal_prior(dim=2, offset=2.0)


@pytest.fixture
def standard_gaussian() -> GaussianMixture:
    return GaussianMixture.gaussian(mean=torch.zeros(2), cov=torch.eye(2))


@pytest.fixture
def identity_ae():
    return pseudo_inverse_encoder(torch.eye(2), torch.zeros(2), rho=1e-3)


@pytest.fixture
def generator() -> torch.Generator:
    return torch.Generator().manual_seed(0)
