"""Shared exception types."""


class ScmsError(Exception):
    """Base class for errors raised by this package."""


class ParseError(ScmsError):
    """Malformed binary input; carries the byte offset where parsing failed."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class DecryptionError(ScmsError):
    """Authenticated decryption failed (wrong key or tampered payload)."""


class StoreAccessError(ScmsError):
    """A component attempted to open a store namespace it does not own."""


class InvariantViolation(ScmsError):
    """A structural invariant of the system was broken (e.g. a device
    bypassing the location obscurer proxy)."""
