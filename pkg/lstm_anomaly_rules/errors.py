from typing import Optional

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class AnomalyRulesError(Exception):
    exit_code = EXIT_DATA

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.stage = stage

    def tagged(self, stage: str) -> "AnomalyRulesError":
        if not self.stage:
            self.stage = stage
        return self

    def __str__(self):
        if self.stage:
            return f"[{self.stage}] {self.message}"
        return self.message


class DataError(AnomalyRulesError, ValueError):
    """Input data is missing, malformed or violates a precondition."""

    exit_code = EXIT_DATA


class NumericalError(AnomalyRulesError, ArithmeticError):
    """Training diverged, an optimizer failed or a result is not finite."""

    exit_code = EXIT_NUMERICAL


class GpdFitError(NumericalError):
    pass
