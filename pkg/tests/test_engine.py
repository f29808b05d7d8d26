import math
from dataclasses import replace

import pytest
import torch

from dwgf.errors import ConfigError, NumericError, ShapeError
from dwgf.flow.engine import DWGFSampler, FlowConfig, Problem, TimeSampling, drift_lipschitz_bound, run
from dwgf.flow.optim import OptimizerConfig
from dwgf.modules.autoencoder import pseudo_inverse_encoder
from dwgf.modules.observation import ForwardOperator, observe
from dwgf.modules.prior import GaussianMixture
from dwgf.modules.schedule import Schedule
from dwgf.utils.oracles import GaussianDist, map_point
from dwgf.utils.verification import make_linear_problem


def euler(step_size=None) -> OptimizerConfig:
    return OptimizerConfig(name="euler", step_size=step_size)


@pytest.fixture
def identity_problem() -> Problem:
    prior = GaussianMixture.gaussian(mean=[1.0, -1.0], cov=[[1.0, 0.3], [0.3, 0.5]])
    op = ForwardOperator.identity(2)
    return Problem(
        schedule=Schedule(),
        prior=prior,
        autoencoder=pseudo_inverse_encoder(torch.eye(2), torch.zeros(2), rho=1e-6),
        observation=observe(op, torch.tensor([0.5, 2.0]), sigma_y=1.0, generator=torch.Generator().manual_seed(1)),
    )


@pytest.fixture
def small_problem() -> Problem:
    return make_linear_problem(seed=1, pixel_dim=6, keep=[0, 1, 3, 4], sigma_y=0.1, rho=0.1, schedule=Schedule(T=30))


def test_identity_problem_lands_on_observation(identity_problem: Problem) -> None:
    config = FlowConfig(gamma=0.0, lambda_hat=0.0, num_particles=4, optimizer=euler(0.1), progress_bar=False)
    result = run(identity_problem, config)

    y = identity_problem.observation.y
    assert (result.particles - y).norm(dim=-1).max().item() < 1e-3
    assert (result.decoded - y).abs().max().item() < 1e-3


def test_zero_gamma_converges_to_map_point() -> None:
    problem = make_linear_problem(
        seed=0, latent_dim=2, pixel_dim=8, keep=[0, 2, 5, 7], sigma_y=1e-3, schedule=Schedule(T=10_000)
    )
    config = FlowConfig(gamma=0.0, lambda_hat=0.1, num_particles=4, optimizer=euler(), progress_bar=False)
    result = run(problem, config)

    prior = GaussianDist(*problem.prior.moments())
    target = map_point(prior, problem.autoencoder, problem.observation, lambda_hat=0.1)
    errors = (result.particles - target).norm(dim=-1) / target.norm()
    assert errors.max().item() < 1e-2


def test_monotone_descent() -> None:
    problem = make_linear_problem(
        seed=2, pixel_dim=8, keep=[1, 2, 3, 6], sigma_y=1.0, rho=1e-6, schedule=Schedule(T=50)
    )
    config = FlowConfig(gamma=0.0, lambda_hat=0.0, optimizer=euler(1e-2), keep_trajectory=True, progress_bar=False)
    result = run(problem, config)

    ae, model = problem.autoencoder, problem.observation
    objective = -model.log_likelihood(ae.decode(result.trajectory))  # states x particles
    increments = objective[1:] - objective[:-1]
    assert increments.max().item() <= 1e-10
    assert torch.all(objective[-1] < objective[0])


def test_drifts_are_permutation_equivariant(small_problem: Problem, generator: torch.Generator) -> None:
    sampler = DWGFSampler(small_problem, FlowConfig(gamma=0.7, num_particles=6, optimizer=euler()))
    snapshot = small_problem.prior.sample(6, generator=generator)
    eps = torch.randn(6, 6, generator=generator)
    nu = torch.randn(6, 2, generator=generator)
    perm = torch.randperm(6, generator=generator)

    u, v = sampler.drifts(snapshot, 12, eps, nu)
    u_perm, v_perm = sampler.drifts(snapshot[perm], 12, eps[perm], nu[perm])

    torch.testing.assert_close(u_perm, u[perm])
    torch.testing.assert_close(v_perm, v[perm])


def test_runs_are_deterministic(small_problem: Problem) -> None:
    config = FlowConfig(num_particles=5, seed=11, keep_trajectory=True, progress_bar=False)

    first, second = run(small_problem, config), run(small_problem, config)
    assert torch.equal(first.trajectory, second.trajectory)

    other = run(small_problem, replace(config, seed=12))
    assert not torch.equal(first.particles, other.particles)


def test_initial_particles_are_prior_draws(small_problem: Problem) -> None:
    config = FlowConfig(num_particles=3, seed=4, keep_trajectory=True, progress_bar=False)
    result = run(small_problem, config)

    expected = small_problem.prior.sample(3, generator=torch.Generator().manual_seed(4))
    assert torch.equal(result.trajectory[0], expected)


def test_explicit_initial_particles(small_problem: Problem) -> None:
    start = torch.zeros(2, 2)
    result = run(small_problem, FlowConfig(keep_trajectory=True, progress_bar=False), initial_particles=start)

    assert result.particles.shape == (2, 2)
    assert torch.equal(result.trajectory[0], start)


def test_schedule_times(small_problem: Problem) -> None:
    deterministic = DWGFSampler(small_problem, FlowConfig(optimizer=euler())).schedule_times()
    assert deterministic == list(range(30, 0, -1))

    terminal = DWGFSampler(small_problem, FlowConfig(include_terminal_step=True)).schedule_times()
    assert terminal[-1] == 0 and len(terminal) == 31

    uniform = DWGFSampler(small_problem, FlowConfig(time_sampling=TimeSampling.UNIFORM, seed=3)).schedule_times()
    assert len(uniform) == 30 and min(uniform) >= 1 and max(uniform) <= 30
    assert uniform == DWGFSampler(small_problem, FlowConfig(time_sampling="uniform", seed=3)).schedule_times()


def test_terminal_step_has_no_regularization(small_problem: Problem) -> None:
    config = FlowConfig(gamma=1.0, include_terminal_step=True, trace=True, num_particles=3, progress_bar=False)
    result = run(small_problem, config)

    last = [row for row in result.trace if row["s"] == 0]
    assert len(last) == 3
    assert all(row["v_norm"] == 0.0 and row["regularization"] == 0.0 for row in last)


def test_trace_rows(small_problem: Problem) -> None:
    result = run(small_problem, FlowConfig(num_particles=2, trace=True, progress_bar=False))

    assert len(result.trace) == 2 * result.num_steps
    first = result.trace[0]
    assert (first["step"], first["s"], first["particle"]) == (0, 30, 0)
    assert set(first) == {
        "step", "s", "particle", "lr", "likelihood", "consistency", "regularization", "u_norm", "v_norm"
    }


def test_adam_learning_rate_is_annealed_over_the_sweep(small_problem: Problem) -> None:
    result = run(small_problem, FlowConfig(num_particles=1, trace=True, progress_bar=False))
    lrs = [row["lr"] for row in result.trace]

    assert lrs[0] == pytest.approx(1.0)
    assert all(later <= earlier + 1e-12 for earlier, later in zip(lrs, lrs[1:]))
    assert lrs[-1] == pytest.approx(0.5 * (1 + math.cos(math.pi * 29 / 30)))

    constant = run(small_problem, FlowConfig(num_particles=1, optimizer=euler(1e-3), trace=True, progress_bar=False))
    assert {row["lr"] for row in constant.trace} == {1e-3}


def test_trajectory_shape(small_problem: Problem) -> None:
    result = run(small_problem, FlowConfig(num_particles=3, keep_trajectory=True, progress_bar=False))
    assert result.trajectory.shape == (31, 3, 2)
    assert torch.equal(result.trajectory[-1], result.particles)


def test_decoded_outputs_are_noiseless(small_problem: Problem) -> None:
    result = run(small_problem, FlowConfig(num_particles=2, progress_bar=False))
    torch.testing.assert_close(result.decoded, small_problem.autoencoder.decode(result.particles))


def test_shared_decode_noise(small_problem: Problem) -> None:
    sampler = DWGFSampler(small_problem, FlowConfig(num_particles=3, shared_decode_noise=True))
    eps, nu = sampler._draw_noise(3)

    assert torch.equal(eps[0], eps[2])
    assert not torch.equal(nu[0], nu[2])


def test_automatic_euler_step(small_problem: Problem) -> None:
    config = FlowConfig(gamma=0.5, optimizer=euler())
    sampler = DWGFSampler(small_problem, config)

    assert sampler.config.optimizer.step_size == pytest.approx(0.5 / drift_lipschitz_bound(small_problem, config))
    assert config.optimizer.step_size is None


def test_numeric_failure_carries_step(small_problem: Problem, monkeypatch) -> None:
    def failing_drift(*args, **kwargs):
        raise NumericError("Non-finite pixel-space drift", particle=1)

    monkeypatch.setattr("dwgf.flow.engine.data_drift", failing_drift)
    with pytest.raises(NumericError) as err:
        run(small_problem, FlowConfig(num_particles=2, progress_bar=False))
    assert (err.value.step, err.value.s, err.value.particle) == (0, 30, 1)


def test_problem_dimensions(small_problem: Problem) -> None:
    with pytest.raises(ShapeError):
        replace(small_problem, prior=GaussianMixture.gaussian(torch.zeros(3), torch.eye(3)))
    with pytest.raises(ShapeError):
        replace(small_problem, x_true=torch.zeros(5))


@pytest.mark.parametrize(
    "kwargs, field",
    [
        ({"gamma": -0.1}, "flow.gamma"),
        ({"lambda_hat": float("inf")}, "flow.lambda_hat"),
        ({"num_particles": 0}, "flow.num_particles"),
        ({"c": 1.0}, "flow.c"),
    ],
)
def test_invalid_flow_config(kwargs, field: str) -> None:
    with pytest.raises(ConfigError) as err:
        FlowConfig(**kwargs)
    assert err.value.fields == (field,)
