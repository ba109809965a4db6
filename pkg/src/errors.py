"""
Exception hierarchy

Every error raised on purpose derives from BiphotonError and carries the
process exit code the CLI returns for it.
"""
from typing import Any, Callable, List, Optional, Sequence, Tuple

from pydantic import ValidationError


class BiphotonError(Exception):
    exit_code = 1


class ConfigError(BiphotonError):
    """Invalid run configuration; carries every problem found, not just the first"""
    exit_code = 2

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class IngestionError(BiphotonError):
    exit_code = 5


class DomainError(BiphotonError):
    """Value outside a validity window (dispersion model range, grid span)"""
    exit_code = 3


class RegimeError(BiphotonError):
    exit_code = 3


class UndefinedRegimeError(RegimeError):
    """Walk-off constant A <= 0, so η and the short-pulse formulas are undefined"""


class PhaseMatchingError(BiphotonError):
    exit_code = 3


class SizingError(BiphotonError):
    exit_code = 4

    def __init__(self, message: str, suggestion: Optional[str] = None):
        self.suggestion = suggestion
        if suggestion:
            message = f"{message} (suggestion: {suggestion})"
        super().__init__(message)


class NumericalError(BiphotonError):
    exit_code = 4


class DecompositionError(NumericalError):
    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(f"{message} {self.diagnostics}" if self.diagnostics else message)


class FitConvergenceError(NumericalError):
    def __init__(self, message: str, best_point: Any = None):
        self.best_point = best_point
        super().__init__(message)


class WidthError(NumericalError):
    pass


class IncompleteSupportError(WidthError):
    """No half-maximum crossing on one side of the peak: the axis span is too small"""


class AmbiguousPeakError(WidthError):
    def __init__(self, message: str, crossings: Sequence[float]):
        self.crossings = list(crossings)
        super().__init__(f"{message}: crossings at {self.crossings}")


class UnitMismatchError(BiphotonError):
    exit_code = 2


def format_validation_errors(
    exc: ValidationError,
    locate: Optional[Callable[[Tuple[Any, ...]], Optional[int]]] = None,
) -> List[str]:
    """
    One line per pydantic error: dotted key, line number when `locate` knows
    it, then the message.
    """
    problems = []
    for err in exc.errors():
        loc = tuple(err["loc"])
        key = ".".join(str(part) for part in loc) or "<root>"
        line = locate(loc) if locate else None
        where = f"{key} (line {line})" if line else key
        problems.append(f"{where}: {err['msg']}")
    return problems
