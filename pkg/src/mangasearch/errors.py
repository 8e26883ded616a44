"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation/parse problems exit 1,
I/O and file-integrity problems exit 2.
"""


class MangaSearchError(Exception):
    """Base class for all package errors."""


class ValidationError(MangaSearchError):
    """An invariant or precondition was violated (bad box, bad vector, bad params)."""


class AnnotationParseError(MangaSearchError):
    """Annotation document is malformed; message carries line/element context."""


class FileFormatError(MangaSearchError):
    """A binary or structured file does not match its declared format."""


class TruncatedFileError(FileFormatError):
    """File ended in the middle of a header or record."""


class ChecksumError(FileFormatError):
    """Stored checksum does not match the file contents."""


class DimensionMismatchError(MangaSearchError):
    """Vector dimensionality differs from what the context requires."""


class NonFiniteValueError(MangaSearchError):
    """A vector contains NaN or infinity."""


class ProviderError(MangaSearchError):
    """An embedding provider failed (network, malformed response, missing id)."""
