"""Exception hierarchy. One class per error family so CLI exit codes map cleanly."""


class SpihetError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 4


class ConfigError(SpihetError):
    """Invalid configuration (unknown keys, bad values, missing paths)."""

    exit_code = 2


class GeometryError(SpihetError):
    """Detector geometry file or parameter problem."""

    exit_code = 2


class ShapeSupportError(SpihetError):
    """Particle violates the oversampling precondition of the volume grid."""

    exit_code = 2


class OutOfGridError(SpihetError):
    """A detector q-vector falls outside the 3D volume grid."""

    exit_code = 2


class SparseFormatError(SpihetError):
    """Corrupt or incompatible .spf file."""

    exit_code = 3


class CommonLineError(SpihetError):
    """No valid angle pair for a pattern pair (distinct from low similarity)."""


class EmptyClassError(SpihetError):
    """EMC class lost all responsibility and could not be reseeded."""


class RegressorError(SpihetError):
    """Feature-length mismatch or non-finite training loss."""


class NoStreakError(SpihetError):
    """No detectable streak fringes for the cube size fit (frame skipped)."""


class MeasurementError(SpihetError):
    """Degenerate input to a measurement (e.g. empty thresholded volume)."""


class SelectionError(SpihetError):
    """Sequence selection produced an empty set or misaligned tables."""


class StageError(SpihetError):
    """A pipeline stage failed or its inputs are missing."""


class LockError(SpihetError):
    """Another pipeline already owns the workdir."""
