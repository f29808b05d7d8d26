import pytest
import torch

from dwgf.flow.optim import OptimizerConfig, OptimizerName
from dwgf.utils.verification import (
    SUITES,
    PropertyCheck,
    Suite,
    check_fixed_point,
    check_gradients,
    check_reparameterization,
    check_weighted_kl,
    make_linear_problem,
    run_suite,
)


def _assert_passed(checks) -> None:
    assert checks and all(isinstance(check, PropertyCheck) for check in checks)
    failed = [f"{check.name}: {check.measured:.3e} vs {check.threshold:.1e}" for check in checks if not check.passed]
    assert not failed, failed


def test_every_suite_is_registered() -> None:
    assert set(SUITES) == set(Suite)


def test_gradients_suite() -> None:
    _assert_passed(check_gradients())


def test_weighted_kl_suite() -> None:
    _assert_passed(check_weighted_kl())


def test_reparameterization_suite() -> None:
    checks = check_reparameterization()
    _assert_passed(checks)
    assert checks[0].measured == 0.0


@pytest.mark.slow
def test_fixed_point_suite() -> None:
    _assert_passed(check_fixed_point())


@pytest.mark.slow
def test_fixed_point_under_euler_steps() -> None:
    _assert_passed(check_fixed_point(optimizer=OptimizerConfig(name=OptimizerName.EULER, step_size=0.05)))


def test_run_suite_by_name() -> None:
    checks = run_suite("reparam")
    assert [check.passed for check in checks] == [True]

    with pytest.raises(ValueError):
        run_suite("nonexistent")


def test_linear_problem_is_seeded() -> None:
    first, second = make_linear_problem(seed=9, keep=[0, 1, 2]), make_linear_problem(seed=9, keep=[0, 1, 2])

    assert torch.equal(first.observation.y, second.observation.y)
    assert torch.equal(first.autoencoder.weight, second.autoencoder.weight)
    assert first.observation.op.output_dim == 3
