from typing import Optional


class AdsbModelError(Exception):
    """Base class for every error raised by the interference model."""

    if not hasattr(Exception, "add_note"):  # Python < 3.11 (PEP 678 backport)
        def add_note(self, note: str) -> None:
            if not isinstance(note, str):
                raise TypeError("note must be a str")
            notes = self.__dict__.setdefault("__notes__", [])
            notes.append(note)


class ConfigError(AdsbModelError):
    """A configuration document is missing a key or carries an ill-typed value."""

    def __init__(self, field: str, message: str):
        self.field = field
        self.message = message
        super().__init__(f"{field}: {message}")

    def __reduce__(self):
        # Rebuild from the constructor arguments so errors survive a worker pool.
        return self.__class__, (self.field, self.message), self.__dict__


class ValidationError(AdsbModelError, ValueError):
    """A parameter violates one of its invariants."""

    def __init__(self, field: str, constraint: str):
        self.field = field
        self.constraint = constraint
        super().__init__(f"{field} violates constraint: {constraint}")

    def __reduce__(self):
        return self.__class__, (self.field, self.constraint), self.__dict__


class InvalidBandError(ValidationError):
    pass


class DomainError(AdsbModelError, ValueError):
    pass


class SingularDistanceError(DomainError):
    """A transmitter sits exactly on the ground station."""


class NoTargetError(AdsbModelError):
    pass


class UnsupportedFadingError(AdsbModelError):
    """The analytic path only covers Rayleigh fading (shape 1)."""


class IntegrationAccuracyError(AdsbModelError):
    def __init__(self, message: str, error_estimate: Optional[float] = None):
        self.error_estimate = error_estimate
        super().__init__(message)

    def __reduce__(self):
        return self.__class__, (self.args[0], self.error_estimate), self.__dict__


class EmptyBucketError(AdsbModelError):
    pass


class PlacementError(AdsbModelError):
    pass
