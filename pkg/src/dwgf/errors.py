from typing import Optional


class DWGFError(Exception):
    """Base class of every error raised by the package."""


class DomainError(DWGFError, ValueError):
    """An argument lies outside the domain of the operation (e.g. a time outside [0, T])."""


class DegenerateKernelError(DomainError):
    """The forward kernel has zero variance (s = 0), so a Gaussian score over it is undefined."""


class ShapeError(DWGFError, ValueError):
    """Dimension mismatch between vectors, matrices or modules."""


class ConfigError(DWGFError, ValueError):
    """Invalid experiment configuration.

    The message always starts with the dotted path(s) of the offending field(s).
    """

    def __init__(self, *fields: str, reason: str):
        self.fields = fields
        self.reason = reason
        super().__init__(f"{', '.join(fields)}: {reason}")


class NumericError(DWGFError, ArithmeticError):
    """Non-finite values or singular linear systems.

    When raised from inside the flow loop, the step, diffusion time and particle index are attached.
    """

    def __init__(
        self,
        message: str,
        step: Optional[int] = None,
        s: Optional[int] = None,
        particle: Optional[int] = None,
    ):
        self.message = message
        self.step = step
        self.s = s
        self.particle = particle

        named = (("step", step), ("s", s), ("particle", particle))
        context = [f"{name}={value}" for name, value in named if value is not None]
        super().__init__(f"{message} [{', '.join(context)}]" if context else message)


def parse_choice(enum_cls, field: str, value):
    """`enum_cls(value)`, with unknown values reported as a `ConfigError` on `field`."""
    try:
        return enum_cls(value)
    except ValueError:
        choices = ", ".join(member.value for member in enum_cls)
        raise ConfigError(field, reason=f"unknown value {value!r}, expected one of: {choices}") from None
