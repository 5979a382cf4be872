from __future__ import annotations

from typing import Dict, Optional, Type

from pydantic import ValidationError


class TwistorError(Exception):
    """Base class for every error raised by twistorkit."""


class ConfigError(TwistorError, ValueError):
    pass


class DimensionError(TwistorError, ValueError):
    pass


class PreconditionError(TwistorError, ValueError):
    pass


class UnsupportedOperation(PreconditionError):
    pass


class DegeneratePlaneError(PreconditionError):
    pass


class DomainError(PreconditionError):
    """Chart point outside the fixture's coordinate domain."""


class ConstraintError(TwistorError, ValueError):
    """Input does not lie in the subspace the operation requires."""


class InvariantViolation(TwistorError, ArithmeticError):
    """A mathematical post-check failed."""


class FiniteDifferenceError(InvariantViolation):
    pass


class VerdictDisagreement(InvariantViolation):
    pass


EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_USAGE = 2

_EXIT_CODES: Dict[Type[BaseException], int] = {
    InvariantViolation: EXIT_INVARIANT,
    ConfigError: EXIT_USAGE,
    DimensionError: EXIT_USAGE,
    PreconditionError: EXIT_USAGE,
    ConstraintError: EXIT_USAGE,
    FileNotFoundError: EXIT_USAGE,
}



def _known_exit_code(exc: BaseException) -> Optional[int]:
    if isinstance(exc, ValidationError):
        return EXIT_USAGE
    for exc_type, code in _EXIT_CODES.items():
        if isinstance(exc, exc_type):
            return code
    return None


def is_known_error(exc: BaseException) -> bool:
    return _known_exit_code(exc) is not None


def exit_code_for(exc: BaseException) -> int:
    """Usage problems map to 2; invariant violations and anything unexpected map to 1."""
    code = _known_exit_code(exc)
    return EXIT_INVARIANT if code is None else code
