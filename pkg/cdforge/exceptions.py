# cdforge/exceptions.py

"""
Error types raised by the library.
Each one also derives from the builtin that callers would catch for the same situation.
"""


class CdforgeError(Exception):
    """Root of every library error."""


class DomainError(CdforgeError, ValueError):
    """An argument lies outside the domain of the operation."""


class ResourceError(CdforgeError, MemoryError):
    """A dense dimension or window-width cap was exceeded."""


class SingularityError(CdforgeError, ArithmeticError):
    """A state or map became numerically zero."""


class DegenerateKernelError(SingularityError):
    """Kernel dimension of a reduced density matrix is not separated by a spectral gap."""

    def __init__(self, message, eigenvalues=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues


class StructuralError(CdforgeError, ValueError):
    """Term lists evaluated at neighbouring s do not line up."""


class DegenerateSystemError(CdforgeError, ArithmeticError):
    """Gram matrix carries no usable direction while b is nonzero."""


class IntegratorError(CdforgeError, RuntimeError):
    """A propagation step failed to converge."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class OutOfRangeError(CdforgeError, ValueError):
    """A requested target is not bracketed by the available grid."""

    def __init__(self, message, grid_endpoints=None):
        super().__init__(message)
        self.grid_endpoints = grid_endpoints


class UsageError(CdforgeError, ValueError):
    """Experiment configuration is invalid."""
