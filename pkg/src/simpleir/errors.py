"""Exception taxonomy shared by every subsystem.

The CLI maps these onto process exit codes: usage problems exit 1,
data problems exit 2, numeric failures exit 3.
"""


class SimpleIRError(Exception):
    """Base class for all package errors."""


class DimensionError(SimpleIRError):
    """Tensor or image axes do not fit the operation's contract."""


class ConfigurationError(SimpleIRError):
    """A configuration value is out of its declared range."""


class ContractError(SimpleIRError):
    """An API precondition was violated by the caller."""


class NumericError(SimpleIRError):
    """A NaN or Inf appeared; the offending operation is aborted."""


class DataError(SimpleIRError):
    """A dataset, manifest, or image file is missing or inconsistent."""


class FormatError(DataError):
    """An input file uses an unsupported encoding."""


class CheckpointVersionError(SimpleIRError):
    """A checkpoint was written by an incompatible format version."""
