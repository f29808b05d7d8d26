import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import hydra
import omegaconf
import torch
from nn_core.common import PROJECT_ROOT
from omegaconf import OmegaConf
from pytorch_lightning import seed_everything
from torch import Tensor

from dwgf.data.io_utils import indexed_columns, save_matrix, save_records
from dwgf.data.problem import Experiment, Metric, build_problem
from dwgf.flow.engine import FlowResult
from dwgf.flow.engine import run as run_flow
from dwgf.utils.metrics import ensemble_stats, psnr

pylogger = logging.getLogger(__name__)

TRACE_COLUMNS = ["step", "s", "particle", "lr", "likelihood", "consistency", "regularization", "u_norm", "v_norm"]


@dataclass
class RunOutcome:
    output_dir: Path
    result: FlowResult
    psnrs: Optional[Tensor]
    spread: float


def _peak(x_true: Tensor) -> float:
    peak = (x_true.max() - x_true.min()).item()
    return peak if peak > 0 else 1.0


def particle_metrics(experiment: Experiment, result: FlowResult) -> List[Dict[str, float]]:
    problem, metrics = experiment.problem, experiment.metrics
    mean = result.particles.mean(dim=0)

    rows = []
    for i, (z, x) in enumerate(zip(result.particles, result.decoded)):
        row = {"particle": i}
        if Metric.PSNR in metrics and problem.x_true is not None:
            row["psnr"] = psnr(x, problem.x_true, peak=_peak(problem.x_true))
        if Metric.RESIDUAL in metrics and problem.observation is not None:
            residual = problem.observation.residual(x).abs().max() / problem.observation.sigma_y
            row["residual_max_sigma"] = residual.item()
        if Metric.SPREAD in metrics:
            row["distance_to_mean"] = (z - mean).norm().item()
        rows.append(row)
    return rows


def summary_rows(experiment: Experiment, result: FlowResult, rows: List[Dict[str, float]]) -> List[Dict]:
    problem = experiment.problem
    summary = [
        {"statistic": "num_particles", "value": result.particles.shape[0]},
        {"statistic": "num_steps", "value": result.num_steps},
    ]

    if rows and "psnr" in rows[0]:
        psnrs = torch.tensor([row["psnr"] for row in rows])
        summary.append({"statistic": "psnr_mean", "value": psnrs.mean().item()})
        summary.append({"statistic": "psnr_std", "value": psnrs.std().item() if len(psnrs) > 1 else 0.0})
        if problem.observation is not None:
            corrupted = problem.observation.op.back_project(problem.observation.y)
            summary.append(
                {"statistic": "psnr_corrupted", "value": psnr(corrupted, problem.x_true, peak=_peak(problem.x_true))}
            )
    if rows and "residual_max_sigma" in rows[0]:
        summary.append({"statistic": "residual_max_sigma", "value": max(row["residual_max_sigma"] for row in rows)})

    mean = result.particles.mean(dim=0)
    summary.extend({"statistic": f"mean_{j}", "value": value} for j, value in enumerate(mean.tolist()))
    if result.particles.shape[0] > 1:
        _, cov = ensemble_stats(result.particles)
        for j in range(cov.shape[0]):
            for k in range(cov.shape[1]):
                summary.append({"statistic": f"cov_{j}_{k}", "value": cov[j, k].item()})
        summary.append({"statistic": "cov_trace", "value": torch.trace(cov).item()})
    else:
        summary.append({"statistic": "cov_trace", "value": 0.0})
    return summary


def write_artifacts(experiment: Experiment, result: FlowResult) -> Path:
    output_dir = experiment.output_dir
    output_dir.mkdir(parents=True, exist_ok=True)
    ae = experiment.problem.autoencoder

    save_matrix(output_dir / "particles_latent.csv", result.particles, indexed_columns("z", ae.latent_dim))
    save_matrix(output_dir / "particles_decoded.csv", result.decoded, indexed_columns("x", ae.pixel_dim))

    rows = particle_metrics(experiment, result)
    save_records(output_dir / "metrics.csv", rows, columns=list(rows[0].keys()))
    save_records(output_dir / "summary.csv", summary_rows(experiment, result, rows), columns=["statistic", "value"])

    if experiment.flow.trace:
        save_records(output_dir / "trace.csv", result.trace, columns=TRACE_COLUMNS)

    if result.trajectory is not None:
        num_states, num_particles, _ = result.trajectory.shape
        index = torch.cartesian_prod(torch.arange(num_states), torch.arange(num_particles)).to(result.trajectory.dtype)
        flat = torch.cat([index, result.trajectory.reshape(num_states * num_particles, -1)], dim=1)
        save_matrix(output_dir / "trajectory.csv", flat, ["step", "particle"] + indexed_columns("z", ae.latent_dim))

    OmegaConf.save(experiment.cfg, output_dir / "config.yaml", resolve=True)
    return output_dir


def run(cfg: omegaconf.DictConfig) -> RunOutcome:
    experiment = build_problem(cfg)

    num_threads = cfg.output.get("num_threads", None)
    if num_threads:
        torch.set_num_threads(num_threads)

    problem = experiment.problem
    op = problem.observation.op if problem.observation is not None else None
    pylogger.info(
        f"Experiment: latent {problem.autoencoder.latent_dim}, pixel {problem.autoencoder.pixel_dim}, "
        f"prior with {problem.prior.num_components} component(s), operator {op}"
    )

    result = run_flow(problem, experiment.flow)
    output_dir = write_artifacts(experiment, result)
    pylogger.info(f"Artifacts written to <{output_dir}>")

    psnrs = None
    if problem.x_true is not None:
        psnrs = torch.tensor([psnr(x, problem.x_true, peak=_peak(problem.x_true)) for x in result.decoded])
    spread = torch.trace(ensemble_stats(result.particles)[1]).item() if result.particles.shape[0] > 1 else 0.0

    return RunOutcome(output_dir=output_dir, result=result, psnrs=psnrs, spread=spread)


@hydra.main(config_path=str(PROJECT_ROOT / "conf"), config_name="inpainting", version_base=None)
def main(cfg: omegaconf.DictConfig):
    seed_everything(cfg.flow.seed)
    run(cfg)


if __name__ == "__main__":
    main()
