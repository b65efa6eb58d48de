"""Exception hierarchy shared across the package."""


class SngclError(Exception):
    """Base class for all errors raised by this package."""


class InputError(SngclError, ValueError):
    """Caller passed inconsistent or out-of-range arguments."""


class TrainingDivergedError(SngclError):
    """The training loss became non-finite; message names the epoch."""


class CheckpointError(SngclError):
    """Base class for checkpoint read failures."""


class CheckpointFormatError(CheckpointError):
    """File does not start with the expected magic bytes."""


class CheckpointVersionError(CheckpointError):
    """File uses a newer format version than this build understands."""


class CheckpointCorruptionError(CheckpointError):
    """File ends mid-record or contains an impossible length field."""


class DatasetError(SngclError):
    """Base class for dataset loading failures."""


class ParseError(DatasetError):
    """A dataset file line could not be parsed; message carries the line number."""


class IntegrityError(DatasetError):
    """Loaded arrays disagree with the dataset manifest."""
