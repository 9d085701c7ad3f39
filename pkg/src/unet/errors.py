"""Exception types shared across the package."""


class UnetError(Exception):
    """Base class for all package-specific errors."""


class EncodeError(UnetError):
    """Message cannot be encoded (invariant violation or oversize frame)."""


class NeedMoreBytes(UnetError):
    """Byte buffer does not yet contain a complete frame."""


class DecodeError(UnetError):
    """Frame is malformed or carries an unknown kind tag."""


class InvalidMessage(UnetError):
    """Frame decoded structurally but violates a message invariant."""


class ConfigError(UnetError):
    """Profile or scenario configuration is invalid; message carries the field path."""


class ScenarioError(UnetError):
    """A scenario cannot produce the measurement it was built for."""


class LinkDown(UnetError):
    """Transmit attempted on a link whose endpoints are out of range."""


class AlreadyExists(UnetError):
    """Duplicate registration (link, node, channel)."""


class NoRoute(UnetError):
    """Routing table has no entry for the destination."""


class NoGateway(UnetError):
    """ECMP group has no live member."""
