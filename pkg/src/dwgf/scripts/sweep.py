import logging
from pathlib import Path
from typing import Any, List, Sequence

import omegaconf
import yaml
from omegaconf import OmegaConf

from dwgf.data.io_utils import save_records
from dwgf.errors import ConfigError
from dwgf.scripts.run import run

pylogger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["value", "psnr_mean", "psnr_std", "spread"]

_MISSING = object()


def parse_values(raw: str) -> List[Any]:
    """`0,0.15,0.5` -> [0, 0.15, 0.5]; each item is read as a YAML scalar."""
    items = [item.strip() for item in raw.split(",") if item.strip()]
    if not items:
        raise ConfigError("values", reason="the value list is empty")
    return [yaml.safe_load(item) for item in items]


def sweep(cfg: omegaconf.DictConfig, param: str, values: Sequence[Any]) -> Path:
    """Run the experiment once per value of `param`, each into its own subdirectory."""
    if not values:
        raise ConfigError("values", reason="the value list is empty")
    if OmegaConf.select(cfg, param, default=_MISSING) is _MISSING:
        raise ConfigError(param, reason="not found in the config")

    base_dir = Path(cfg.output.dir)
    rows = []
    for value in values:
        run_cfg = OmegaConf.create(OmegaConf.to_container(cfg, resolve=True))
        OmegaConf.update(run_cfg, param, value)
        run_cfg.output.dir = str(base_dir / f"{param}={value}")

        pylogger.info(f"Sweep {param}={value}")
        outcome = run(run_cfg)

        psnrs = outcome.psnrs
        rows.append(
            {
                "value": value,
                "psnr_mean": psnrs.mean().item() if psnrs is not None else float("nan"),
                "psnr_std": psnrs.std().item() if psnrs is not None and len(psnrs) > 1 else float("nan"),
                "spread": outcome.spread,
            }
        )

    return save_records(base_dir / "sweep_summary.csv", rows, columns=SWEEP_COLUMNS)
