"""Exception types.

The CLI maps :class:`ConfigError` to exit code 1 and :class:`SolverError`
(and subclasses) to exit code 2.
"""


class PtwaveError(Exception):
    pass


class ConfigError(PtwaveError, ValueError):
    pass


class ParseError(ConfigError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class SolverError(PtwaveError, RuntimeError):
    pass


class IntegrationError(SolverError):
    pass


class ConvergenceError(SolverError):
    pass


class AmplitudeFloorError(SolverError):
    pass


class HypothesisError(SolverError):
    """A structural hypothesis (parabolicity, submersion, ...) failed."""


class NondegeneracyError(SolverError):
    pass


class ContourError(SolverError):
    pass
