"""Exception hierarchy.

Validation problems derive from ``ValidationError`` (CLI exit code 1),
filesystem problems from ``IoFailure`` (exit code 2).
"""


class GeoProtoError(Exception):
    pass


class ValidationError(GeoProtoError, ValueError):
    pass


class IoFailure(GeoProtoError, OSError):
    pass


class BadMagic(ValidationError):
    pass


class DimMismatch(ValidationError):
    pass


class NonBinaryMask(ValidationError):
    pass


class TruncatedPayload(ValidationError):
    pass


class NotP5(ValidationError):
    pass


class ZeroArea(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class TooSmall(ValidationError):
    pass


class ChannelMismatch(ValidationError):
    pass


class EmptyMask(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class NonFinite(ValidationError):
    pass


class ConfigError(ValidationError):
    pass
