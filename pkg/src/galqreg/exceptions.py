"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input data, priors, or configuration violate a documented invariant."""


class NumericalError(RuntimeError):
    """A numerical routine failed (factorization, quadrature, optimizer)."""


class DegenerateRegionError(NumericalError):
    """A truncation region carries essentially no probability mass."""


class CalibrationError(NumericalError):
    """Proposal calibration failed to converge after all restarts."""
