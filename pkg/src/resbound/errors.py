"""Exception and warning types shared across the package.

All mathematical precondition failures derive from :class:`ResboundError`
so callers (in particular the CLI) can distinguish "the input violates a
theorem hypothesis" from plain malformed input.
"""

from __future__ import annotations


class ResboundError(Exception):
    """Base class for all errors raised by resbound engines."""


# --- expression handling -------------------------------------------------

class ExpressionSyntaxError(ResboundError):
    """Malformed expression text. ``offset`` is the byte position of the
    offending token in the source string."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnknownIdentifier(ExpressionSyntaxError):
    """Name outside the variable/function whitelist."""


class UnboundVariable(ResboundError):
    """Expression evaluated without a binding for one of its variables."""


class DomainError(ResboundError):
    """Evaluation outside a function's domain (ln of a non-positive value,
    division by zero, non-integer power of a non-positive base, ...)."""


# --- grids, operators, roots ---------------------------------------------

class InvalidDomain(ResboundError):
    """Degenerate integration domain (T <= 0 or too few nodes)."""


class OutOfDomain(ResboundError):
    """Query point outside the sampled domain; bounds are never extrapolated."""


class DegreeTooLarge(ResboundError):
    """Characteristic polynomial degree above the supported cap (n = 10)."""


# --- bound engines --------------------------------------------------------

class UnstableSystem(ResboundError):
    """A characteristic root has positive real part; the closed-form
    envelope does not apply and the operator-composition bound must be
    used instead."""


class NeedExplicitJordan(ResboundError):
    """Eigenvalues cluster within tolerance, so the numerical block
    decomposition is ill-posed; supply the transformation matrix and
    blocks explicitly."""


class SingularMatrix(ResboundError):
    """Matrix is singular to working precision."""


class CoefficientVanishes(ResboundError):
    """The zeroth-order PDE coefficient vanishes or changes sign on the
    mesh, so the constant bound is not applicable."""


class StagnationPoint(ResboundError):
    """The characteristic vector field vanishes along the traced path."""


class NoBoundaryHit(ResboundError):
    """Characteristic tracing exhausted its step budget without leaving
    the domain."""


class NotOnDirichletBoundary(ResboundError):
    """A traced characteristic exits the domain through a boundary
    segment that carries no Dirichlet data."""


class StepUnderflow(ResboundError):
    """Adaptive integrator step size collapsed below machine resolution."""


class ProblemFormatError(ResboundError):
    """Problem file fails schema validation or references missing files."""


# --- warnings ---------------------------------------------------------------

class IllConditionedBoundWarning(UserWarning):
    """A root lies very close to the imaginary axis: the closed-form
    envelope's 1/Re(-lambda) factor is enormous and the bound, while
    valid, is likely useless."""


class OutOfValidityWarning(UserWarning):
    """A queried perturbation strength exceeds the declared validity
    radius; the truncation tail is not controlled there."""
