"""
Custom exception types for illumcomp.

Provides granular error classification so the CLI can map failures to stable
exit codes and so callers can react to geometry or numerical failures
without string matching.

Exception Hierarchy:
    IllumCompError (base)
    ├── ValidationError
    │   ├── ShapeMismatchError
    │   ├── ConfigValidationError
    │   ├── InvalidRegionError
    │   └── CorpusError
    ├── GeometryError
    │   ├── DegenerateQuadError
    │   ├── NonInvertibleHomographyError
    │   └── NoRegionFoundError
    ├── IlluminationError
    │   ├── DegenerateIlluminationError
    │   └── NearHorizontalLightError
    ├── NumericalError
    │   └── NonFiniteLossError
    └── StorageError

Usage:
    from illumcomp.utils.errors import DegenerateQuadError

    try:
        H = estimate_homography(src, dst)
    except DegenerateQuadError as e:
        logger.error(f"Bad region: {e}")
        raise
"""

from typing import Any, Dict, Optional


class IllumCompError(Exception):
    """Base exception for all illumcomp errors."""

    exit_code: int = 1

    def __init__(
        self,
        message: str,
        error_code: str = "ILLUMCOMP_ERROR",
        details: Optional[Dict[str, Any]] = None
    ) -> None:
        """
        Initialize IllumCompError.

        Args:
            message: Human-readable error description
            error_code: Machine-readable error identifier
            details: Additional context (shapes, step number, etc.)
        """
        self.message = message
        self.error_code = error_code
        self.details = details or {}
        super().__init__(self.message)

    def to_dict(self) -> Dict[str, Any]:
        """Convert error to a JSON-friendly report."""
        return {
            "error": self.error_code,
            "message": self.message,
            "details": self.details,
            "exit_code": self.exit_code,
        }


# ============================================================================
# VALIDATION
# ============================================================================

class ValidationError(IllumCompError):
    """Base exception for invalid inputs, configs and corpora."""

    exit_code = 2

    def __init__(
        self,
        message: str,
        error_code: str = "VALIDATION_ERROR",
        details: Optional[Dict[str, Any]] = None
    ) -> None:
        """Initialize ValidationError."""
        super().__init__(message, error_code, details)


class ShapeMismatchError(ValidationError):
    """Raised when tensor shapes, ranks or channel counts disagree."""

    def __init__(
        self,
        message: str,
        shapes: Optional[Dict[str, Any]] = None,
        details: Optional[Dict[str, Any]] = None
    ) -> None:
        """
        Initialize ShapeMismatchError.

        Args:
            message: Error description
            shapes: Offending shapes keyed by argument name
            details: Additional context
        """
        full_details = details or {}
        full_details["shapes"] = {k: list(v) for k, v in (shapes or {}).items()}
        super().__init__(message, error_code="SHAPE_MISMATCH", details=full_details)


class ConfigValidationError(ValidationError):
    """Raised when a configuration file or override is invalid."""

    def __init__(
        self,
        message: str,
        key: str = "",
        details: Optional[Dict[str, Any]] = None
    ) -> None:
        """
        Initialize ConfigValidationError.

        Args:
            message: Error description
            key: Offending configuration key (dotted path)
            details: Additional context
        """
        full_details = details or {}
        full_details["key"] = key
        super().__init__(message, error_code="CONFIG_VALIDATION_ERROR", details=full_details)


class InvalidRegionError(ValidationError):
    """Raised when a Region violates its convexity or bounds invariant."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        """Initialize InvalidRegionError."""
        super().__init__(message, error_code="INVALID_REGION", details=details)


class CorpusError(ValidationError):
    """Raised when a corpus directory is missing, empty or inconsistent."""

    def __init__(
        self,
        message: str,
        path: str = "",
        details: Optional[Dict[str, Any]] = None
    ) -> None:
        """Initialize CorpusError."""
        full_details = details or {}
        full_details["path"] = path
        super().__init__(message, error_code="CORPUS_ERROR", details=full_details)


# ============================================================================
# GEOMETRY
# ============================================================================

class GeometryError(IllumCompError):
    """Base exception for homography and region failures."""

    exit_code = 2

    def __init__(
        self,
        message: str,
        error_code: str = "GEOMETRY_ERROR",
        details: Optional[Dict[str, Any]] = None
    ) -> None:
        """Initialize GeometryError."""
        super().__init__(message, error_code, details)


class DegenerateQuadError(GeometryError):
    """Raised when three vertices of a quadrilateral are collinear."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        """Initialize DegenerateQuadError."""
        super().__init__(message, error_code="DEGENERATE_QUAD", details=details)


class NonInvertibleHomographyError(GeometryError):
    """Raised when a homography is singular or badly conditioned."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        """Initialize NonInvertibleHomographyError."""
        super().__init__(message, error_code="NON_INVERTIBLE_HOMOGRAPHY", details=details)


class NoRegionFoundError(GeometryError):
    """Raised when region selection exhausts its attempt budget."""

    def __init__(
        self,
        message: str,
        attempts: int = 0,
        details: Optional[Dict[str, Any]] = None
    ) -> None:
        """Initialize NoRegionFoundError."""
        full_details = details or {}
        full_details["attempts"] = attempts
        super().__init__(message, error_code="NO_REGION_FOUND", details=full_details)


# ============================================================================
# ILLUMINATION
# ============================================================================

class IlluminationError(IllumCompError):
    """Base exception for lighting-related failures."""

    exit_code = 2

    def __init__(
        self,
        message: str,
        error_code: str = "ILLUMINATION_ERROR",
        details: Optional[Dict[str, Any]] = None
    ) -> None:
        """Initialize IlluminationError."""
        super().__init__(message, error_code, details)


class DegenerateIlluminationError(IlluminationError):
    """Raised when SH coefficients carry no usable band-1 energy."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        """Initialize DegenerateIlluminationError."""
        super().__init__(message, error_code="DEGENERATE_ILLUMINATION", details=details)


class NearHorizontalLightError(IlluminationError):
    """Raised when a light is too close to the horizon to cast a finite shadow."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None) -> None:
        """Initialize NearHorizontalLightError."""
        super().__init__(message, error_code="NEAR_HORIZONTAL_LIGHT", details=details)


# ============================================================================
# NUMERICAL / STORAGE
# ============================================================================

class NumericalError(IllumCompError):
    """Base exception for numerical failures during optimization."""

    exit_code = 3

    def __init__(
        self,
        message: str,
        error_code: str = "NUMERICAL_ERROR",
        details: Optional[Dict[str, Any]] = None
    ) -> None:
        """Initialize NumericalError."""
        super().__init__(message, error_code, details)


class NonFiniteLossError(NumericalError):
    """Raised when a training loss becomes NaN or infinite."""

    def __init__(
        self,
        message: str,
        step: int = -1,
        details: Optional[Dict[str, Any]] = None
    ) -> None:
        """
        Initialize NonFiniteLossError.

        Args:
            message: Error description
            step: Training step at which the loss diverged
            details: Loss values at failure
        """
        full_details = details or {}
        full_details["step"] = step
        self.step = step
        super().__init__(message, error_code="NON_FINITE_LOSS", details=full_details)


class StorageError(IllumCompError):
    """Raised when reading or writing files fails."""

    exit_code = 1

    def __init__(
        self,
        message: str,
        path: str = "",
        details: Optional[Dict[str, Any]] = None
    ) -> None:
        """
        Initialize StorageError.

        Args:
            message: Error description
            path: File causing the storage error
            details: Additional storage context
        """
        full_details = details or {}
        full_details["path"] = path
        super().__init__(message, error_code="STORAGE_ERROR", details=full_details)
