"""Exception hierarchy shared by every stage of the re-compressor."""


class JrepackError(Exception):
    """Base class for all errors raised by :mod:`jrepack`."""


class UnsupportedJpeg(JrepackError):
    """The input is a JPEG, but not the baseline Huffman flavour we handle."""


class CorruptStream(JrepackError, ValueError):
    """An entropy-coded stream (JPEG scan, MSAC or RLRG payload) is malformed."""


class EncodingOverflow(JrepackError):
    """A coefficient cannot be expressed with the stored Huffman tables."""


class CorruptContainer(JrepackError, ValueError):
    """A re-compressed container is truncated or inconsistent."""


class VersionMismatch(CorruptContainer):
    """The container was written by an incompatible format version."""


class DomainError(JrepackError, ValueError):
    """A numeric argument lies outside the domain of the function."""


class ConfigError(JrepackError, ValueError):
    """Inconsistent or unusable configuration values."""


class SymbolOutOfAlphabet(JrepackError, ValueError):
    """A symbol handed to an entropy coder is outside the coefficient alphabet."""


class MissingPartnerMap(JrepackError):
    """Cross-bucket prediction was requested without a partner map."""


class EmptyInput(JrepackError, ValueError):
    """An estimator received no samples."""


class InsufficientData(JrepackError, ValueError):
    """Too few blocks to compute the requested statistic."""


class InternalMismatch(JrepackError):
    """The encoder's self-check could not reproduce its input.

    Never escapes :func:`jrepack.container.compress`; it is converted into a
    raw-scan fallback container.
    """
