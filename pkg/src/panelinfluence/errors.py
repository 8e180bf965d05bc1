"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class PanelInfluenceError(Exception):
    """Base class. ``module`` names the pipeline stage that raised."""

    module = "panelinfluence"
    exit_code = 1


class ValidationError(PanelInfluenceError, ValueError):
    """Malformed input data or configuration."""

    exit_code = 2

    def __init__(self, message: str, *, module: str = "panel", row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.module = module
        self.row = row


class SingularityError(PanelInfluenceError, ArithmeticError):
    """A matrix that must be inverted is singular or too ill-conditioned."""

    exit_code = 3

    def __init__(self, message: str, *, module: str = "estimator", condition: float | None = None):
        super().__init__(message)
        self.module = module
        self.condition = condition


class SingularBlockError(SingularityError):
    """Deleting the given unit(s) leaves the design rank deficient."""

    def __init__(self, message: str, *, units: tuple, condition: float | None = None):
        super().__init__(message, module="deletion", condition=condition)
        self.units = units
