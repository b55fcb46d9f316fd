"""Exception types shared across the package."""


class TimeCapsuleError(Exception):
    """Base class for every error raised by this package."""


class DomainError(TimeCapsuleError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class SamplingExhausted(TimeCapsuleError):
    """Rejection sampling hit its iteration cap without accepting a value."""


class StreamCapExceeded(TimeCapsuleError, ValueError):
    """A PRNG read would run past the configured stream length."""


class UnknownDifficulty(TimeCapsuleError, KeyError):
    pass


class TableRangeError(TimeCapsuleError, ValueError):
    pass


class ConfigError(TimeCapsuleError, ValueError):
    pass


class ResourceError(TimeCapsuleError):
    pass


class DecodeError(TimeCapsuleError, ValueError):
    """Bytes or a decrypted plaintext do not follow the expected layout."""


class FrameError(DecodeError):
    pass


class VersionError(FrameError):
    pass


class BlockInvalidated(TimeCapsuleError):
    """A user's revealed message does not hash to the nonce the user committed.

    ``evidence`` is the offending user's signature over the commitment list and
    seed, which is enough for a third party to attribute the misbehaviour.
    """

    def __init__(self, index: int, evidence: bytes, signed_payload: bytes, reason: str):
        super().__init__(f"user {index} invalidated the block: {reason}")
        self.index = index
        self.evidence = evidence
        self.signed_payload = signed_payload
        self.reason = reason


class ProtocolAborted(TimeCapsuleError):
    """A commit session ended without completing."""
