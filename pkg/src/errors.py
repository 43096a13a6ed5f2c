from typing import Any, Dict, Optional


class JointOrbitError(Exception):
    """Base class for every error raised by the analyzer"""

    exit_code = 1

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context = context or {}

    def to_dict(self) -> Dict[str, Any]:
        return {"type": type(self).__name__, "message": self.message, **self.context}


class InputError(JointOrbitError):
    """Bad input: spec files, expressions, flags. CLI exit code 2."""

    exit_code = 2


class NumericalError(JointOrbitError):
    """The math did not check out. CLI exit code 3."""

    exit_code = 3


class ConfigError(InputError):
    pass


class ExprSyntaxError(InputError):
    def __init__(self, message: str, offset: int, text: str = ""):
        super().__init__(f"{message} at offset {offset}", {"offset": offset, "text": text})
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    def __init__(self, name: str, offset: int, text: str = ""):
        super().__init__(f"unknown identifier '{name}'", offset, text)
        self.name = name


class SpecFormatError(InputError):
    pass


class ArityError(SpecFormatError):
    pass


class FixtureNotFoundError(InputError):
    pass


class DimensionError(InputError):
    pass


class BackendError(InputError):
    pass


class EvalDomainError(NumericalError):
    """Evaluation left the domain of a builtin (division by zero, sqrt of a negative)"""

    def __init__(self, message: str, subexpr: str = "", **context: Any):
        super().__init__(message, {"subexpr": subexpr, **context})
        self.subexpr = subexpr

    def located(self, **context: Any) -> "EvalDomainError":
        where = ", ".join(f"{k}={v}" for k, v in context.items())
        merged = {**self.context, **context}
        merged.pop("subexpr", None)
        return EvalDomainError(f"{self.message} ({where})", self.subexpr, **merged)


class SamplingError(NumericalError):
    pass


class ConsistencyError(NumericalError):
    pass


class FlowDomainError(NumericalError):
    def __init__(self, message: str, step: int, **context: Any):
        super().__init__(f"{message} at step {step}", {"step": step, **context})
        self.step = step


class CompletionError(NumericalError):
    pass
