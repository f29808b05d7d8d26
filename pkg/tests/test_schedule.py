import math

import pytest
import torch

from dwgf.errors import ConfigError, DomainError, ShapeError
from dwgf.modules.schedule import Schedule


def test_alpha_sigma_at_zero(schedule: Schedule) -> None:
    assert schedule.alpha_sigma(0) == (1.0, 0.0)


def test_alpha_sigma_at_horizon(schedule: Schedule) -> None:
    alpha, sigma = schedule.alpha_sigma(schedule.T)

    # B(1) = 0.1 + 19.9 / 2 = 10.05
    assert alpha == pytest.approx(math.exp(-5.025), rel=1e-12)
    assert alpha == pytest.approx(6.56e-3, abs=1e-5)
    assert sigma == pytest.approx(math.sqrt(1 - alpha**2), rel=1e-12)


def test_variance_preserving_on_grid(schedule: Schedule) -> None:
    worst = max(abs(a**2 + s**2 - 1.0) for a, s in map(schedule.alpha_sigma, range(schedule.T + 1)))
    assert worst < 1e-12


def test_marginal_coefficients_match_grid(schedule: Schedule) -> None:
    times = torch.arange(schedule.T + 1)
    alpha, sigma = schedule.marginal_coefficients(times)

    expected = torch.tensor([schedule.alpha_sigma(s) for s in range(schedule.T + 1)])
    torch.testing.assert_close(alpha, expected[:, 0], rtol=1e-12, atol=1e-14)
    torch.testing.assert_close(sigma, expected[:, 1], rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("s", [-1, 1000, 2.5])
def test_alpha_sigma_outside_grid(schedule: Schedule, s) -> None:
    with pytest.raises(DomainError):
        schedule.alpha_sigma(s)


def test_diffuse_at_zero_is_identity(schedule: Schedule, generator: torch.Generator) -> None:
    z0 = torch.randn(3, generator=generator)
    eps = torch.randn(3, generator=generator)
    assert torch.equal(schedule.diffuse(z0, 0, eps), z0)


def test_diffuse_from_origin(schedule: Schedule) -> None:
    _, sigma = schedule.alpha_sigma(400)
    out = schedule.diffuse(torch.zeros(2), 400, torch.tensor([1.0, 0.0]))
    torch.testing.assert_close(out, torch.tensor([sigma, 0.0]))


def test_diffuse_arithmetic(fixed_schedule) -> None:
    out = fixed_schedule.diffuse(torch.tensor([1.0, 1.0]), 3, torch.tensor([1.0, -1.0]))
    torch.testing.assert_close(out, torch.tensor([1.4, 0.2]))


def test_diffuse_shape_mismatch(schedule: Schedule) -> None:
    with pytest.raises(ShapeError):
        schedule.diffuse(torch.zeros(2), 10, torch.zeros(3))


def test_diffuse_moments(schedule: Schedule, generator: torch.Generator) -> None:
    s, num_samples = 300, 100_000
    _, sigma = schedule.alpha_sigma(s)
    z0 = torch.tensor([1.0, -2.0])

    samples = schedule.diffuse(z0, s, torch.randn(num_samples, 2, generator=generator))
    standard_error = sigma**2 * math.sqrt(2.0 / (num_samples - 1))

    assert torch.all((samples.var(dim=0) - sigma**2).abs() < 3 * standard_error)


def test_weight(schedule: Schedule, fixed_schedule) -> None:
    assert schedule.weight(0, 0.5) == 0.0
    assert fixed_schedule.weight(1, 0.5) == pytest.approx(0.225, rel=1e-12)


@pytest.mark.parametrize("c", [0.0, 1.0, -0.2, 1.5])
def test_weight_rejects_c(schedule: Schedule, c: float) -> None:
    with pytest.raises(ConfigError, match="^c:"):
        schedule.weight(10, c)


def test_weight_is_nondecreasing_over_the_grid(schedule: Schedule) -> None:
    weights = torch.tensor([schedule.weight(s, 0.5) for s in range(schedule.T + 1)])

    assert weights[0] == 0.0 and torch.isfinite(weights).all()
    assert torch.all(weights[1:] >= weights[:-1])


def test_sweep(schedule: Schedule) -> None:
    times = schedule.sweep()
    assert times[0] == schedule.T and times[-1] == 1 and len(times) == schedule.T
    assert schedule.sweep(include_zero=True)[-1] == 0


@pytest.mark.parametrize(
    "kwargs, field",
    [
        ({"T": 0}, "T"),
        ({"beta_min": 0.0}, "beta_min"),
        ({"beta_min": 5.0, "beta_max": 1.0}, "beta_max"),
    ],
)
def test_invalid_schedule(kwargs, field: str) -> None:
    with pytest.raises(ConfigError) as err:
        Schedule(**kwargs)
    assert field in err.value.fields
