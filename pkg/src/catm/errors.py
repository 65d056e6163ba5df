"""Exception types raised across the package."""


class CATMError(Exception):
    """Base class for all package errors."""


class ConfigError(CATMError, ValueError):
    """Invalid model, grid or scenario configuration.

    ``path`` names the offending config entry (dotted), when known.
    """

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class DefectiveMatrixError(CATMError):
    """An eigenvector has (near) zero c-norm, so it cannot be c-normalized."""

    def __init__(self, eigenvalue, cnorm):
        self.eigenvalue = eigenvalue
        self.cnorm = cnorm
        super().__init__(
            f"near-defective eigenvalue {eigenvalue:.12g}: c-norm {abs(cnorm):.3e}"
        )


class ConvergenceError(CATMError):
    """The wave-operator iteration failed to converge.

    Carries the residual history so callers can retry with other settings.
    """

    def __init__(self, message, history=None, segment=None):
        self.history = list(history or [])
        self.segment = segment
        if segment is not None:
            message = f"segment {segment}: {message}"
        super().__init__(message)


class DivergenceError(ConvergenceError):
    """Residual grew or stagnated beyond the configured detector."""


class NearDegeneracyError(ConvergenceError):
    """An RDWA denominator vanished for some extended-basis index."""

    def __init__(self, index, value, history=None):
        self.index = index
        self.value = value
        super().__init__(
            f"near-degenerate denominator {abs(value):.3e} at extended index {index}",
            history,
        )


class SelectionError(ConvergenceError):
    """No Ritz vector in the Krylov subspace overlaps the initial state."""
