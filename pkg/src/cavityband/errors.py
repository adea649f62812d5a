"""Exception hierarchy shared by all cavityband modules."""


class CavityBandError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(CavityBandError, ValueError):
    """One or more parameter invariants are violated.

    ``errors`` holds one message per violated invariant, each naming the field.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class InconsistentSignError(CavityBandError, ValueError):
    """Lattice depth and coupling have opposite signs (negative photon number)."""


class TruncationError(CavityBandError, RuntimeError):
    """The plane-wave basis did not converge within the largest allowed size."""


class DerivativeUnavailable(CavityBandError, RuntimeError):
    """Finite-difference steps collapsed; derivatives cannot be trusted."""


class NotFoundError(CavityBandError, RuntimeError):
    """A search (root, critical point, threshold) found nothing in its window."""

    def __init__(self, message, reason="not-found"):
        self.reason = reason
        super().__init__(message)


class ExtremizationFailure(CavityBandError, RuntimeError):
    """Variational extremization did not converge from any seed."""


class ValidationFailure(CavityBandError, RuntimeError):
    """Two independent methods disagree (e.g. branch counts differ at some q)."""

    def __init__(self, message, q=None):
        self.q = q
        super().__init__(message)


class DegenerateWindow(CavityBandError, RuntimeError):
    """Exactly one fold point found: the detuning sits on the critical point."""


class InconclusiveError(CavityBandError, RuntimeError):
    """Error bounds are too large to decide the requested question."""


class NumericalError(CavityBandError, RuntimeError):
    """A linear-algebra routine failed."""
