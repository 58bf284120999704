"""Exception hierarchy.

Everything raised on bad input derives from :class:`FacePrivError`; the CLI
maps those to exit code 1 and ``OSError`` to exit code 2.
"""

from __future__ import annotations

from typing import Optional


class FacePrivError(Exception):
    """Base class for validation errors raised by this package."""


class FormatError(FacePrivError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class TokenValueError(FormatError):
    """An attribute token outside {-1, 1}."""


class ArityError(FormatError):
    """A row with the wrong number of attribute tokens."""


class IdentityConflictError(FormatError):
    """The same image listed with two different identities."""


class MissingIdentityError(FacePrivError, LookupError):
    def __init__(self, image_id: str):
        self.image_id = image_id
        super().__init__(f"no identity for image {image_id!r}")

    def __str__(self) -> str:
        return self.args[0]


class PersonSpecificError(FacePrivError, ValueError):
    """Two records share both identity and attribute values."""


class SchemaError(FacePrivError, KeyError):
    def __str__(self) -> str:
        return self.args[0] if self.args else ""


class UndefinedDistributionError(FacePrivError, ValueError):
    pass


class DomainError(FacePrivError, ValueError):
    pass


class ConfigurationError(FacePrivError, ValueError):
    pass


class UnsupportedArityError(FacePrivError, ValueError):
    pass


class ParameterError(FacePrivError, ValueError):
    pass


class AlignmentError(FacePrivError, ValueError):
    pass


class NoBoundaryError(FacePrivError, ValueError):
    """No competing class has a reachable decision boundary."""


class DimensionError(FacePrivError, ValueError):
    pass


class ImageError(FacePrivError, ValueError):
    pass


class LevelError(ImageError):
    """Image too small for the requested number of MS-SSIM scales."""
