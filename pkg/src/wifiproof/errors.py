"""Exception hierarchy.

Every error raised by the library derives from :class:`ProofError`, so a
caller can catch the whole family at once. Validation failures additionally
derive from :class:`ValueError`.
"""

from __future__ import annotations


class ProofError(Exception):
    """Base class for all library errors."""

    reason = "ProofError"

    def __str__(self) -> str:
        detail = super().__str__()
        return f"{self.reason}: {detail}" if detail else self.reason


class ValidationError(ProofError, ValueError):
    reason = "ValidationError"


class MalformedBssid(ValidationError):
    reason = "MalformedBssid"


class OutOfRangeField(ValidationError):
    """A numeric field lies outside its declared range."""

    reason = "OutOfRangeField"

    def __init__(self, field: str, value: object = None):
        self.field = field
        self.value = value
        super().__init__(f"{field}={value!r}")

    @property
    def tag(self) -> str:
        return f"OutOfRangeField({self.field})"


class InvalidTimestamp(ValidationError):
    reason = "InvalidTimestamp"


class KindMismatch(ValidationError):
    reason = "KindMismatch"


class ConfigInvalid(ValidationError):
    reason = "ConfigInvalid"


class MissingColumn(ValidationError):
    reason = "MissingColumn"

    def __init__(self, columns):
        self.columns = tuple(columns)
        super().__init__(", ".join(self.columns))


class EmptySource(ValidationError):
    reason = "EmptySource"


class EmptyFilter(ValidationError):
    reason = "EmptyFilter"


class DuplicateId(ValidationError):
    reason = "DuplicateId"


class UnknownLocation(ProofError, KeyError):
    reason = "UnknownLocation"

    def __str__(self) -> str:
        return ProofError.__str__(self)


class UnknownDevice(ProofError, KeyError):
    reason = "UnknownDevice"

    def __str__(self) -> str:
        return ProofError.__str__(self)


class NoObservations(ProofError):
    reason = "NoObservations"


class EmptyStableSet(ProofError):
    reason = "EmptyStableSet"

    def __init__(self, location: str):
        self.location = location
        super().__init__(location)


class NonDisjointStableSets(ProofError):
    reason = "NonDisjointStableSets"

    def __init__(self, networks):
        self.networks = sorted(networks)
        super().__init__(", ".join(str(n) for n in self.networks))


class InsufficientWitnesses(ProofError):
    reason = "InsufficientWitnesses"

    def __init__(self, found: int, required: int):
        self.found = found
        self.required = required
        super().__init__(f"found {found}, required {required}")


class InsufficientDevices(ProofError):
    reason = "InsufficientDevices"


def reason_tag(exc: BaseException) -> str:
    """Short machine-readable tag used in ingest reports and HTTP errors."""
    tag = getattr(exc, "tag", None)
    if tag:
        return tag
    return getattr(exc, "reason", type(exc).__name__)
