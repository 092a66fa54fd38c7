"""Exception types shared across the package.

The CLI maps ValidationError subclasses to exit code 2 and
TrainingError/NumericError to exit code 3.
"""


class AsmQAError(Exception):
    """Base class for all package errors."""


class ValidationError(AsmQAError):
    """Input violates a documented invariant or precondition."""


class ParseError(ValidationError):
    """Malformed file content; carries a line number where possible."""


class UnknownNameError(ValidationError):
    """Lookup of an entity, relation, template, or program that does not exist."""


class ConfigError(ValidationError):
    """Bad configuration: missing templates, incompatible checkpoints, etc."""


class FormatError(ValidationError):
    """Binary/JSON artifact does not match its declared layout."""


class CoverageError(ValidationError):
    """A semantic table does not cover every graph symbol."""


class TrainingError(AsmQAError):
    """Training diverged or produced non-finite values."""


class NumericError(AsmQAError):
    """Non-finite intermediate value in a forward pass."""


class SceneError(ValidationError):
    """Stacked-scene construction failed (e.g. canvas too small)."""


class PlacementError(AsmQAError):
    """No collision-free label position exists for an object."""
