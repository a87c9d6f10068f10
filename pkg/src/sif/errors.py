"""Exception hierarchy shared by every layer of the archive."""


class SifError(Exception):
    """Base class for all archive and protocol failures."""


class ParameterMismatchError(SifError, ValueError):
    """Operands belong to different fields or groups."""


class FieldDivisionByZero(SifError, ZeroDivisionError):
    pass


class PolicyError(SifError, ValueError):
    """Invalid sharing policy, field or group parameters."""


class DegenerateBasisError(SifError, ValueError):
    """Interpolation points are duplicated or zero."""


class InsufficientSharesError(SifError, ValueError):
    pass


class FieldTooLargeError(SifError, ValueError):
    """Exhaustive enumeration refused because the field is too big."""


class AlignmentError(SifError):
    """Share vectors, query vectors or insert indices disagree in length/position."""


class InvalidChainError(SifError, ValueError):
    """The ordered repository list of a query is malformed."""


class RoutingError(SifError):
    """A message was addressed to a repository that is unknown or not in the chain."""


class SubgroupError(SifError, ValueError):
    """A received group element is not in the order-q subgroup."""


class NonceUnavailableError(SifError):
    pass


class DecodeError(SifError, ValueError):
    """Malformed wire frame. ``offset`` is the byte position where decoding failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class TransportError(SifError):
    pass


class QueryTimeout(TransportError, TimeoutError):
    pass


class RemoteError(TransportError):
    """A peer answered with an error frame."""

    def __init__(self, code: int, detail: str):
        super().__init__(f"remote error {code}: {detail}")
        self.code = code
        self.detail = detail
