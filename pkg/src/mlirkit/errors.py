"""Exception types shared across the toolkit."""


class MlirkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(MlirkitError, ValueError):
    """Invalid configuration or missing/inconsistent options."""


class EmptyQueryError(MlirkitError, ValueError):
    """A query analyzed (or stripped) down to nothing."""


class AlignmentError(MlirkitError, ValueError):
    """Parallel per-language inputs disagree in length or content."""


class DuplicateIdError(MlirkitError, ValueError):
    """An identifier that must be unique was seen more than once."""


class DimensionMismatchError(MlirkitError, ValueError):
    """Embedding dimensions of two operands do not agree."""


class FormatError(MlirkitError, ValueError):
    """A data file does not conform to its documented format."""
