"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class SublinearError(Exception):
    """Base class for all errors raised by :mod:`sublinear_lln`."""


class NonIntegrable(SublinearError):
    """The test function grows faster than the law's tails allow."""

    def __init__(self, message: str, member: int | None = None):
        super().__init__(message)
        self.member = member


class QuadratureFailure(SublinearError):
    """Adaptive quadrature did not reach its tolerance within the panel cap."""

    def __init__(self, message: str, member: int | None = None):
        super().__init__(message)
        self.member = member


class MonotonicityViolation(SublinearError):
    """A function declared nondecreasing decreased on the sample grid."""


class MissingJoint(SublinearError):
    """A joint pair law was requested for a pair the model does not describe."""


class TooLarge(SublinearError):
    """Exhaustive enumeration would exceed the configured cap."""


class SamplerUnavailable(SublinearError):
    """The distribution cannot be sampled by inverse transform."""


class BoundViolated(SublinearError):
    """A proof-chain inequality failed; this indicates an implementation bug."""

    def __init__(self, message: str, n: int, inequality: str, k: int | None = None):
        super().__init__(message)
        self.n = n
        self.inequality = inequality
        self.k = k


class ParseError(SublinearError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field {field!r}")
        super().__init__(f"{', '.join(loc)}: {message}" if loc else message)
        self.line = line
        self.field = field


class ValidationError(SublinearError):
    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason
