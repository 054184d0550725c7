class DomainError(ValueError):
    """Argument outside the domain an operation supports."""


class PeakNotResolved(ValueError):
    """No half-maximum crossing on one side of a peak."""

    def __init__(self, msg="peak not resolved"):
        super().__init__(msg)


class ConsistencyError(RuntimeError):
    """An analytic moment came out negative beyond roundoff."""


class ConfigError(ValueError):
    """Invalid campaign configuration. ``errors`` holds one message per problem."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
