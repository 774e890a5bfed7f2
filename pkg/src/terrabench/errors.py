"""Exception and warning taxonomy shared across the toolkit."""


class TerrabenchError(Exception):
    """Base class for all toolkit errors."""


# --- raster / tile I/O ---

class UnsupportedFormat(TerrabenchError):
    """File uses a feature outside the supported format subset."""


class CorruptHeader(TerrabenchError):
    """Tile header cannot be parsed."""


class DimensionMismatch(TerrabenchError):
    """Declared grid dimensions disagree with the payload."""


class IoFailure(TerrabenchError):
    """Underlying file I/O failed."""


class DegenerateInput(TerrabenchError):
    """Input grid is too small or otherwise degenerate for the operation."""


# --- geodesy ---

class OutOfDomain(TerrabenchError):
    """Coordinate outside the validity domain of the transform."""


# --- alignment ---

class InsufficientOverlap(TerrabenchError):
    """Source and target extents overlap less than required."""


class CrsMismatch(TerrabenchError):
    """Grids are in different coordinate reference systems."""


class AllPixelsFlagged(TerrabenchError):
    """Void repair has no unflagged pixels to interpolate from."""


# --- catalog ---

class EmptyCatalog(TerrabenchError):
    """Operation requires a non-empty catalog."""


class InsufficientStratum(TerrabenchError):
    """A stratum is too small for stratified splitting."""


class InsufficientClassSamples(TerrabenchError):
    """A terrain class has fewer samples than requested."""


class NoPairsFound(TerrabenchError):
    """Manifest build found no RGB-DEM stem pairs."""


class DuplicateId(TerrabenchError):
    """Two files resolve to the same sample id."""


# --- evaluation ---

class DegenerateGroundTruth(TerrabenchError):
    """Ground truth has no variance over the valid mask."""


class NonPositiveDepth(TerrabenchError):
    """Ratio metrics require strictly positive depths."""


class EmptyMask(TerrabenchError):
    """No valid pixels to evaluate."""


class MissingPrediction(TerrabenchError):
    """Prediction files absent for one or more samples."""

    def __init__(self, missing_ids):
        self.missing_ids = list(missing_ids)
        super().__init__(f"missing predictions for: {', '.join(self.missing_ids)}")


# --- diffusion ---

class InvalidSchedule(TerrabenchError):
    """Noise schedule parameters are out of range."""


class ShapeMismatch(TerrabenchError):
    """Tensor shapes are inconsistent."""


class StepOutOfRange(TerrabenchError):
    """Timestep outside 1..T."""


class ContractViolation(TerrabenchError):
    """A denoiser returned output violating its interface contract."""


class BandMismatch(TerrabenchError):
    """Grid band count does not match the operation's requirement."""


# --- review service ---

class SampleNotFound(TerrabenchError):
    """Unknown sample id."""


class TileUnreadable(TerrabenchError):
    """Referenced tile file cannot be loaded."""


class MalformedVerdict(TerrabenchError):
    """Verdict payload fails validation."""


class InvalidPage(TerrabenchError):
    """Pagination parameters out of range."""


# --- cli ---

class ConfigError(TerrabenchError):
    """Configuration file or flag values are invalid."""


class DegenerateDataWarning(UserWarning):
    """Non-fatal degenerate input (constant channel, zero-variance field)."""
