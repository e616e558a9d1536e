"""Exception hierarchy for the skefl package.

Every error raised by the library derives from :class:`SkeflError` so callers
can catch protocol failures without masking programming errors.
"""


class SkeflError(Exception):
    """Base class for all skefl errors."""


class ConfigurationError(SkeflError):
    """A parameter set violates a structural requirement (e.g. 2f+1 > n)."""


class CryptoError(SkeflError):
    """Base class for failures in the encryption layer."""


class KeyMismatchError(CryptoError):
    """Operands of a homomorphic operation were produced under different keys."""


class RangeError(CryptoError):
    """A plaintext or scalar lies outside the representable range."""


class SerializationError(SkeflError):
    """Bytes do not decode to a canonical ciphertext/vector/key."""


class ShareError(SkeflError):
    """Base class for share splitting/merging failures."""


class ShareCountError(ShareError):
    """Wrong number of shares (empty merge, f+1 > n, ...)."""


class ShareShapeError(ShareError):
    """Shares disagree on vector length."""


class ProtocolError(SkeflError):
    """Base class for protocol-state failures."""


class ProtocolOrderError(ProtocolError):
    """A phase ran before its inputs existed (e.g. garble with empty inbox)."""


class IncompleteRoundError(ProtocolError):
    """Aggregation attempted before every client's garbled vector arrived."""


class DuplicateShareError(ProtocolError):
    """A client received two shares for the same (owner, round)."""


class RoutingError(SkeflError):
    """A message was addressed to an unregistered party."""


class InvalidGameError(SkeflError):
    """An adversary experiment was set up inconsistently (victim colluding, ...)."""
