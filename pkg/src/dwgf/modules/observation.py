import logging
from enum import auto
from typing import Optional, Sequence, Union

import torch
from backports.strenum import StrEnum
from torch import Tensor

from dwgf.errors import ConfigError, ShapeError

pylogger = logging.getLogger(__name__)


class OperatorKind(StrEnum):
    IDENTITY = auto()
    MASK = auto()
    DOWNSAMPLE = auto()


class ForwardOperator:
    """Linear corruption operator acting on 1-D signals of length pixel_dim.

    identity: y = x
    mask: y = x[keep], dropped coordinates are removed (inpainting)
    downsample: y = means of non-overlapping blocks of `factor` samples (super-resolution)
    """

    def __init__(
        self,
        kind: Union[OperatorKind, str],
        pixel_dim: int,
        mask: Optional[Union[Tensor, Sequence[bool]]] = None,
        factor: Optional[int] = None,
    ):
        kind = OperatorKind(kind)
        if pixel_dim < 1:
            raise ConfigError("pixel_dim", reason=f"must be positive, got {pixel_dim}")

        if kind == OperatorKind.MASK:
            if mask is None:
                raise ConfigError("mask", reason="a mask operator needs a boolean mask")
            mask = torch.as_tensor(mask, dtype=torch.bool)
            if mask.shape != (pixel_dim,):
                raise ShapeError(f"Mask must have shape ({pixel_dim},), got {tuple(mask.shape)}")
            if not torch.any(mask):
                raise ConfigError("mask", reason="the mask drops every coordinate")
        elif kind == OperatorKind.DOWNSAMPLE:
            if factor is None or factor < 1 or pixel_dim % factor != 0:
                raise ConfigError("factor", reason=f"must be a positive divisor of {pixel_dim}, got {factor}")

        self.kind = kind
        self.pixel_dim = pixel_dim
        self.mask = mask if kind == OperatorKind.MASK else None
        self.factor = int(factor) if kind == OperatorKind.DOWNSAMPLE else None

    @classmethod
    def identity(cls, pixel_dim: int) -> "ForwardOperator":
        return cls(OperatorKind.IDENTITY, pixel_dim)

    @classmethod
    def from_mask(cls, mask: Union[Tensor, Sequence[bool]]) -> "ForwardOperator":
        mask = torch.as_tensor(mask, dtype=torch.bool)
        return cls(OperatorKind.MASK, mask.shape[0], mask=mask)

    @classmethod
    def from_keep(cls, pixel_dim: int, keep: Sequence[int]) -> "ForwardOperator":
        mask = torch.zeros(pixel_dim, dtype=torch.bool)
        mask[torch.as_tensor(list(keep), dtype=torch.long)] = True
        return cls(OperatorKind.MASK, pixel_dim, mask=mask)

    @classmethod
    def box(cls, pixel_dim: int, start: int, stop: int) -> "ForwardOperator":
        """Box inpainting: drop the contiguous block [start, stop)."""
        if not 0 <= start < stop <= pixel_dim:
            raise ConfigError("box", reason=f"need 0 <= start < stop <= {pixel_dim}, got [{start}, {stop})")

        mask = torch.ones(pixel_dim, dtype=torch.bool)
        mask[start:stop] = False
        return cls(OperatorKind.MASK, pixel_dim, mask=mask)

    @classmethod
    def masked(
        cls, pixel_dim: int, keep: Optional[Sequence[int]] = None, box: Optional[Sequence[int]] = None
    ) -> "ForwardOperator":
        """Mask operator from exactly one of `keep` (observed indices) or `box` ([start, stop) dropped)."""
        if (keep is None) == (box is None):
            raise ConfigError("keep", "box", reason="a mask operator needs exactly one of them")
        if box is not None:
            start, stop = box
            return cls.box(pixel_dim, start, stop)

        keep = list(keep)
        if any(not 0 <= index < pixel_dim for index in keep):
            raise ConfigError("keep", reason=f"indices must lie in [0, {pixel_dim}), got {keep}")
        return cls.from_keep(pixel_dim, keep)

    @classmethod
    def downsample(cls, pixel_dim: int, factor: int) -> "ForwardOperator":
        return cls(OperatorKind.DOWNSAMPLE, pixel_dim, factor=factor)

    @property
    def output_dim(self) -> int:
        if self.kind == OperatorKind.MASK:
            return int(self.mask.sum().item())
        if self.kind == OperatorKind.DOWNSAMPLE:
            return self.pixel_dim // self.factor
        return self.pixel_dim

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(kind={self.kind}, pixel_dim={self.pixel_dim}, output_dim={self.output_dim})"

    def apply(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.pixel_dim:
            raise ShapeError(f"Expected signals of length {self.pixel_dim}, got {x.shape[-1]}")

        if self.kind == OperatorKind.MASK:
            return x[..., self.mask]
        if self.kind == OperatorKind.DOWNSAMPLE:
            return x.reshape(*x.shape[:-1], self.output_dim, self.factor).mean(dim=-1)
        return x

    def __call__(self, x: Tensor) -> Tensor:
        return self.apply(x)

    def adjoint(self, u: Tensor) -> Tensor:
        if u.shape[-1] != self.output_dim:
            raise ShapeError(f"Expected observations of length {self.output_dim}, got {u.shape[-1]}")

        if self.kind == OperatorKind.MASK:
            x = u.new_zeros(*u.shape[:-1], self.pixel_dim)
            x[..., self.mask] = u
            return x
        if self.kind == OperatorKind.DOWNSAMPLE:
            return torch.repeat_interleave(u, self.factor, dim=-1) / self.factor
        return u

    def back_project(self, u: Tensor) -> Tensor:
        """Naive reconstruction from an observation: zero-filled (mask) or block-replicated (downsample)."""
        if self.kind == OperatorKind.DOWNSAMPLE:
            return self.factor * self.adjoint(u)
        return self.adjoint(u)

    def matrix(self) -> Tensor:
        """Dense (output_dim, pixel_dim) matrix of the operator."""
        return self.apply(torch.eye(self.pixel_dim)).T


class ObservationModel:
    """y = A(x_0) + eps, eps ~ N(0, sigma_y^2 I)."""

    def __init__(self, op: ForwardOperator, y: Tensor, sigma_y: float):
        y = torch.as_tensor(y, dtype=torch.get_default_dtype())
        if y.shape != (op.output_dim,):
            raise ShapeError(f"Observation must have shape ({op.output_dim},) for {op}, got {tuple(y.shape)}")
        if sigma_y < 0:
            raise ConfigError("sigma_y", reason=f"noise level must be nonnegative, got {sigma_y}")

        self.op = op
        self.y = y
        self.sigma_y = float(sigma_y)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(op={self.op}, sigma_y={self.sigma_y})"

    def _check_noise_level(self) -> None:
        if not self.sigma_y > 0:
            raise ConfigError("sigma_y", reason=f"the likelihood needs a positive noise level, got {self.sigma_y}")

    def log_likelihood(self, x: Tensor) -> Tensor:
        """-(1 / 2 sigma_y^2) ||y - A(x)||^2, up to the normalizing constant."""
        self._check_noise_level()
        return -0.5 * ((self.y - self.op.apply(x)) ** 2).sum(dim=-1) / self.sigma_y**2

    def likelihood_grad(self, x: Tensor) -> Tensor:
        self._check_noise_level()
        return self.op.adjoint(self.y - self.op.apply(x)) / self.sigma_y**2

    def residual(self, x: Tensor) -> Tensor:
        return self.y - self.op.apply(x)


def observe(
    op: ForwardOperator,
    x_true: Tensor,
    sigma_y: float,
    generator: Optional[torch.Generator] = None,
) -> ObservationModel:
    clean = op.apply(x_true)
    noise = torch.randn(clean.shape, generator=generator, dtype=clean.dtype)
    return ObservationModel(op=op, y=clean + sigma_y * noise, sigma_y=sigma_y)
