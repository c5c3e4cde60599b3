"""Error types raised across the solver.

Every error carries a ``detail`` message and the process exit code the CLI
uses when the error reaches it.
"""
from typing import Any, Dict, Optional


class ChoquardError(Exception):
    exit_code = 3

    def __init__(self, detail: str, diagnostics: Optional[Dict[str, Any]] = None,
                 exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        self.diagnostics = dict(diagnostics or {})
        if exit_code is not None:
            self.exit_code = exit_code

    def to_record(self) -> Dict[str, Any]:
        """Structured error record written next to run artifacts"""
        return {
            "type": type(self).__name__,
            "detail": self.detail,
            "diagnostics": self.diagnostics,
            "exit_code": self.exit_code,
        }


class ConfigurationError(ChoquardError):
    """Invalid sizes, unknown keys, ranges or memory bounds"""
    exit_code = 2


class UsageError(ChoquardError):
    exit_code = 2


class NonlinearityRangeError(ChoquardError):
    """Evaluation requested past the finite machine range of a nonlinearity"""
    exit_code = 3

    def __init__(self, detail: str, value: float = float("nan"), location: Optional[float] = None,
                 diagnostics: Optional[Dict[str, Any]] = None):
        diag = dict(diagnostics or {})
        diag.setdefault("value", value)
        if location is not None:
            diag["r"] = location
        super().__init__(detail, diag)
        self.value = value
        self.location = location


class NumericalError(ChoquardError):
    """Quadrature non-convergence, line-search failure, failed closed-form validation"""
    exit_code = 3


class GridMismatchError(ChoquardError):
    exit_code = 3
