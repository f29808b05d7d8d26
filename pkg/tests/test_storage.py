import csv
from pathlib import Path

import pytest
import torch
import yaml
from omegaconf import OmegaConf

from dwgf.data.io_utils import indexed_columns, load_matrix, load_vector, save_matrix, save_records
from dwgf.errors import ConfigError
from dwgf.scripts.run import TRACE_COLUMNS, run


@pytest.fixture(scope="module")
def short_run(compose_cfg):
    cfg = compose_cfg("inpainting", ["schedule.T=20", "flow.trace=true", "flow.keep_trajectory=true"])
    return cfg, run(cfg)


def _header(path: Path):
    with path.open() as f:
        return next(csv.reader(f))


def test_artifacts_are_written(short_run) -> None:
    _, outcome = short_run
    names = {path.name for path in outcome.output_dir.iterdir()}

    expected = {"particles_latent.csv", "particles_decoded.csv", "metrics.csv", "summary.csv", "config.yaml"}
    assert expected | {"trace.csv", "trajectory.csv"} == names


def test_particle_matrices(short_run) -> None:
    _, outcome = short_run
    latent = outcome.output_dir / "particles_latent.csv"

    assert _header(latent) == ["z0", "z1"]
    assert _header(outcome.output_dir / "particles_decoded.csv") == indexed_columns("x", 16)
    assert torch.equal(load_matrix(latent), outcome.result.particles)


def test_metrics_and_summary(short_run) -> None:
    _, outcome = short_run

    assert _header(outcome.output_dir / "metrics.csv") == ["particle", "psnr", "residual_max_sigma", "distance_to_mean"]
    with (outcome.output_dir / "summary.csv").open() as f:
        summary = {row["statistic"]: float(row["value"]) for row in csv.DictReader(f)}

    assert summary["num_particles"] == 4 and summary["num_steps"] == 20
    assert summary["psnr_mean"] == pytest.approx(outcome.psnrs.mean().item(), rel=1e-15)
    assert {"psnr_corrupted", "residual_max_sigma", "mean_0", "cov_1_1", "cov_trace"} <= set(summary)
    assert summary["cov_trace"] == pytest.approx(outcome.spread, rel=1e-15)


def test_trace_and_trajectory(short_run) -> None:
    _, outcome = short_run

    assert _header(outcome.output_dir / "trace.csv") == TRACE_COLUMNS
    assert load_matrix(outcome.output_dir / "trace.csv").shape == (20 * 4, len(TRACE_COLUMNS))

    trajectory = load_matrix(outcome.output_dir / "trajectory.csv")
    assert trajectory.shape == (21 * 4, 4)
    torch.testing.assert_close(trajectory[-4:, 2:], outcome.result.particles, rtol=0, atol=0)


def test_storage_config(short_run) -> None:
    cfg, outcome = short_run

    with (outcome.output_dir / "config.yaml").open() as f:
        loaded_cfg = yaml.safe_load(f)
    assert loaded_cfg == OmegaConf.to_container(cfg, resolve=True)
    assert loaded_cfg["observation"]["operator"]["pixel_dim"] == 16


def test_float_format(tmp_path) -> None:
    path = save_matrix(tmp_path / "m.csv", torch.tensor([[1.0 / 3.0, 2.0]]), ["a", "b"])

    assert path.read_text() == "a,b\n0.33333333333333331,2\n"
    assert load_matrix(path)[0, 0].item() == 1.0 / 3.0


def test_records(tmp_path) -> None:
    records = [{"name": "gamma", "value": 0.1}, {"name": "n", "value": 4}]
    path = save_records(tmp_path / "r.csv", records, ["name", "value"])
    assert path.read_text() == "name,value\ngamma,0.10000000000000001\nn,4\n"


def test_matrix_columns_must_match(tmp_path) -> None:
    with pytest.raises(ValueError):
        save_matrix(tmp_path / "m.csv", torch.zeros(2, 3), ["a", "b"])


def test_load_errors(tmp_path) -> None:
    with pytest.raises(ConfigError):
        load_vector(tmp_path / "missing.csv")

    path = save_matrix(tmp_path / "two.csv", torch.zeros(3, 2), ["a", "b"])
    with pytest.raises(ConfigError, match="single column"):
        load_vector(path)
