import logging
from typing import Callable

import torch
from torch import Tensor

pylogger = logging.getLogger(__name__)


def central_difference(func: Callable[[Tensor], Tensor], x: Tensor, step: float = 1e-5) -> Tensor:
    """Centered finite-difference gradient of a scalar function at x (any shape)."""
    x = x.detach().clone()
    grad = torch.zeros_like(x)

    flat_x, flat_grad = x.view(-1), grad.view(-1)
    for j in range(flat_x.numel()):
        original = flat_x[j].item()

        flat_x[j] = original + step
        f_plus = float(func(x))
        flat_x[j] = original - step
        f_minus = float(func(x))
        flat_x[j] = original

        flat_grad[j] = (f_plus - f_minus) / (2 * step)

    return grad


def central_difference_jacobian(func: Callable[[Tensor], Tensor], x: Tensor, step: float = 1e-5) -> Tensor:
    """Centered finite-difference Jacobian of a vector function of a vector: J[i, j] = d f_i / d x_j."""
    x = x.detach().clone()
    columns = []
    for j in range(x.numel()):
        direction = torch.zeros_like(x)
        direction[j] = step
        columns.append((func(x + direction) - func(x - direction)) / (2 * step))

    return torch.stack(columns, dim=-1)


def relative_error(actual: Tensor, expected: Tensor, floor: float = 1e-300) -> float:
    """||actual - expected|| / ||expected||, floored to avoid division by zero."""
    actual = torch.as_tensor(actual)
    expected = torch.as_tensor(expected)
    return ((actual - expected).norm() / expected.norm().clamp_min(floor)).item()


def make_generator(seed: int) -> torch.Generator:
    return torch.Generator().manual_seed(int(seed))
