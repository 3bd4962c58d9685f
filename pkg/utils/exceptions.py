"""Error hierarchy shared by every module.

The CLI maps ValidationError -> exit 2, NumericError -> exit 3.
"""
from typing import Optional


class FairshiftError(Exception):
    pass


class ValidationError(FairshiftError, ValueError):
    pass


class ConfigError(ValidationError):
    def __init__(self, field_path: str, message: str) -> None:
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")


class ParseError(ValidationError):
    """``line`` is 1-based with the header on line 1; None for file-level failures."""

    def __init__(self, line: Optional[int], message: str, path=None) -> None:
        self.line = line
        where = f"{path}:" if path is not None else ""
        at = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{at}{message}")


class NumericError(FairshiftError, ArithmeticError):
    def __init__(self, module: str, message: str) -> None:
        self.module = module
        super().__init__(f"[{module}] {message}")


class DegenerateConstantError(NumericError):
    pass


class DisconnectedGraphError(NumericError):
    def __init__(self, mu_R: float) -> None:
        self.mu_R = mu_R
        super().__init__(
            "extrapolation",
            f"L_TT is singular (mu_R = {mu_R:.3e}); the source-target graph is disconnected",
        )


class UnsupportedOperationError(FairshiftError, NotImplementedError):
    pass
