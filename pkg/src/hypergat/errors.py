"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class HyperGATError(Exception):
    exit_code = 1


class ConfigError(HyperGATError):
    """Bad configuration value, unknown key or invalid argument."""

    exit_code = 1


class PrerequisiteError(HyperGATError):
    """A workdir artifact from an earlier stage is missing."""

    exit_code = 1


class DataError(HyperGATError):
    """Malformed or unusable input data."""

    exit_code = 2


class NumericalError(HyperGATError):
    """A non-finite value appeared where only finite values are allowed."""

    exit_code = 3
