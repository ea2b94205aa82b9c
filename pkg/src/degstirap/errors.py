"""Exception types raised by the package."""

from __future__ import annotations


class DegStirapError(Exception):
    """Base class for package errors."""


class SingularCouplingError(DegStirapError, ValueError):
    """A coupling block that must be invertible has a vanishing singular value."""


class CaseMismatchError(DegStirapError, ValueError):
    """Manifold sizes do not fit the requested degeneracy ordering."""


class CoarseGridError(DegStirapError, ValueError):
    """Finite-difference derivative estimates are unstable on the given grid."""


class IntegrationError(DegStirapError, RuntimeError):
    """The ODE integrator could not reach the requested tolerance."""


class ScenarioError(DegStirapError, ValueError):
    """A scenario file failed to parse or validate.

    ``line`` is the 1-based line of the offending entry when known.
    """

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        loc = ""
        if path is not None:
            loc = f"{path}:"
        if line is not None:
            loc += f"{line}:"
        super().__init__(f"{loc} {message}" if loc else message)
