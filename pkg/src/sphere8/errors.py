"""Exception hierarchy shared by all estimators."""


class Sphere8Error(Exception):
    """Base class for library errors."""


class DomainError(Sphere8Error, ValueError):
    """An argument lies outside the domain of the operation."""


class SizeError(Sphere8Error, ValueError):
    """Too few correspondences for the requested solver."""


class DegenerateConfigurationError(Sphere8Error):
    """The geometry does not determine a unique solution."""


class AmbiguousPoseError(DegenerateConfigurationError):
    """Cheirality voting could not single out one pose candidate."""


class ConfigError(Sphere8Error, ValueError):
    """Inconsistent experiment or scene configuration."""
