"""
Exception hierarchy shared by every layer of the engine.
"""


class SnnError(Exception):
    """Base class for all engine errors"""

    pass


class DimensionError(SnnError, ValueError):
    """Raised when tensor shapes are inconsistent with an operation"""

    pass


class EncodingError(SnnError, ValueError):
    """Raised when an image cannot be rate-encoded"""

    pass


class NeuronError(SnnError, ValueError):
    """Raised for invalid neuron parameters or non-finite membrane input"""

    pass


class BnttError(SnnError, ValueError):
    """Raised for invalid normalization calls (timestep, batch size, cache)"""

    pass


class StatsNotPopulatedError(BnttError):
    """Raised when eval-mode normalization runs before any training statistics exist"""

    pass


class ConfigError(SnnError):
    """Raised for run configuration problems, optionally tied to a line"""

    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class DatasetFormatError(SnnError):
    """Raised when a dataset file does not match its binary format"""

    pass


class CheckpointError(SnnError):
    """Raised when a checkpoint cannot be written or read back"""

    pass


class ArchitectureMismatchError(SnnError):
    """Raised when state or statistics do not belong to the given architecture"""

    pass


class TrainingDivergedError(SnnError):
    """Raised when the training loss becomes non-finite"""

    pass


class AnalysisError(SnnError, ValueError):
    """Raised for invalid analysis requests (negative noise, untrained gamma, ...)"""

    pass
