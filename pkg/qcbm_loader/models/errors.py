"""
Exception hierarchy for the image-loading engine.

Each error also derives from the closest builtin so callers that only know
about ``ValueError`` / ``IndexError`` keep working.
"""


class QcbmError(Exception):
    """Base class for all engine errors"""


class CapacityError(QcbmError, MemoryError):
    """Requested register is larger than the configured qubit cap"""


class QubitIndexError(QcbmError, IndexError):
    """Gate or query refers to a qubit outside the register"""


class ParameterCountError(QcbmError, ValueError):
    """Parameter vector length does not match the circuit"""


class ResolutionError(QcbmError, ValueError):
    """Distributions or targets are at incompatible resolutions"""


class CircuitStructureError(QcbmError, ValueError):
    """Circuit, layout or schedule violates its structural invariants"""


class ImageFormatError(QcbmError, ValueError):
    """Malformed or unsupported image data"""


class BlockPartitionError(QcbmError, ValueError):
    """Image dimensions are not compatible with the requested blocks"""


class ConfigError(QcbmError, ValueError):
    """Run configuration is missing keys or holds invalid values"""


class TrainingError(QcbmError, ArithmeticError):
    """Loss or gradient became non-finite during optimization"""
