"""Exception types shared across the package."""


class FleetMonError(Exception):
    """Base class for all package-specific errors."""


# --- signal containers & transforms ---------------------------------------

class NonFiniteInput(FleetMonError):
    """Signal data contains NaN or infinite values."""


class DegenerateScale(FleetMonError):
    """Normalization denominator (max-min, sigma, or IQR) is effectively zero."""


class WindowTooShort(FleetMonError):
    """Requested window or frame holds fewer than two samples."""


class CutoffBelowResolution(FleetMonError):
    """Low-pass cutoff lies below the spectral bin resolution."""


class FlatSpectrum(FleetMonError):
    """All non-DC bins are equal; no fundamental peak exists."""


class HarmonicOutOfRange(FleetMonError):
    """Requested harmonic band extends beyond the Nyquist frequency."""


class UpsamplingRequested(FleetMonError):
    """Target resampling rate is not below the source sample rate."""


# --- dissimilarity measures -------------------------------------------------

class DimensionMismatch(FleetMonError):
    """Compared data points have different dimensionality."""


class LengthMismatch(FleetMonError):
    """Compared sequences have different lengths."""


class PsiTooLarge(FleetMonError):
    """Boundary relaxation exceeds the sequence length."""


# --- clustering --------------------------------------------------------------

class UnknownMachine(FleetMonError):
    """Machine id is not a leaf of the dendrogram / matrix."""


class SingleLeaf(FleetMonError):
    """Operation requires a dendrogram with at least two leaves."""


class UndefinedCorrelation(FleetMonError):
    """Cophenetic correlation is undefined (fewer than two pairs or zero variance)."""


# --- detection ----------------------------------------------------------------

class DegenerateFleet(FleetMonError):
    """Every indicator dimension has zero spread across the fleet."""


# --- configuration & ingestion --------------------------------------------

class InvalidConfig(FleetMonError):
    """Configuration value violates its contract."""


class ParseError(FleetMonError):
    """Malformed data file; message carries the offending line number."""


class RateMismatch(FleetMonError):
    """Time column is not uniformly sampled."""


class RaggedColumns(FleetMonError):
    """Data rows disagree on the number of columns."""
