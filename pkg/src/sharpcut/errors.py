"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input fails a structural precondition (shape, model, invariant)."""


class ModelMismatchError(ValidationError):
    """Two objects live in different models or on different systems."""


class ZeroProbabilityError(ValidationError):
    """A conditional post-measurement state was requested for an outcome of
    (numerically) zero probability."""


class OrthogonalityError(ValidationError):
    """A pair of effects expected to be orthogonal is not.

    Carries the offending pair of labels/indices and the numerical residual.
    """

    def __init__(self, message, pair=None, residual=None):
        super().__init__(message)
        self.pair = pair
        self.residual = residual


class LimitExceeded(RuntimeError):
    """A configured resource limit (e.g. clique-search vertex cap) was hit."""
