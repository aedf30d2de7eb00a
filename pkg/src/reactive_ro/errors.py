"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration.

    ``key`` names the offending entry as ``[section].key`` when known.
    """

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class SolverError(RuntimeError):
    """A linear or nonlinear solve failed to reach its tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        self.residual = residual
        self.iterations = iterations
        if residual is not None:
            message = f"{message} (residual={residual:.3e})"
        super().__init__(message)


class CouplingError(RuntimeError):
    """The outer Picard iteration diverged."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics
        super().__init__(message)
