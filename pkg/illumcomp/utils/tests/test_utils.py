"""
Unit tests for illumcomp utilities.

Test Coverage:
- Logging configuration (file creation, handler setup, idempotence)
- Exception hierarchy (error codes, details, serialization, exit codes)

Usage:
python -m pytest illumcomp/utils/tests/test_utils.py -v
"""

import logging
from pathlib import Path

import pytest

from illumcomp.utils.errors import (
    ConfigValidationError,
    CorpusError,
    DegenerateQuadError,
    IllumCompError,
    NearHorizontalLightError,
    NonFiniteLossError,
    NoRegionFoundError,
    ShapeMismatchError,
    StorageError,
    ValidationError,
)
from illumcomp.utils.logging_config import setup_logging


def _close(logger: logging.Logger) -> None:
    for handler in logger.handlers[:]:
        handler.close()
        logger.removeHandler(handler)


class TestLoggingConfig:
    """setup_logging."""

    def test_handlers(self, tmp_path: Path) -> None:
        logger = setup_logging("illumcomp_test_handlers", log_file=tmp_path / "a.log")
        try:
            handler_types = {type(h).__name__ for h in logger.handlers}
            assert {"StreamHandler", "FileHandler"} <= handler_types
            assert logger.level == logging.DEBUG
        finally:
            _close(logger)

    def test_writes_file(self, tmp_path: Path) -> None:
        log_file = tmp_path / "logs" / "run.log"
        logger = setup_logging("illumcomp_test_file", log_file=log_file)
        try:
            logger.debug("detail line")
            for handler in logger.handlers:
                handler.flush()
            text = log_file.read_text(encoding="utf-8")
            assert "detail line" in text
            assert "DEBUG" in text
        finally:
            _close(logger)

    def test_idempotent(self, tmp_path: Path) -> None:
        logger = setup_logging("illumcomp_test_idem", log_file=tmp_path / "b.log")
        try:
            count = len(logger.handlers)
            again = setup_logging("illumcomp_test_idem", log_file=tmp_path / "c.log")
            assert again is logger
            assert len(again.handlers) == count
            assert not (tmp_path / "c.log").exists()
        finally:
            _close(logger)


class TestCustomErrors:
    """Exception hierarchy."""

    def test_base(self) -> None:
        error = IllumCompError("boom")
        assert error.error_code == "ILLUMCOMP_ERROR"
        assert error.to_dict() == {"error": "ILLUMCOMP_ERROR", "message": "boom", "details": {}, "exit_code": 1}
        assert str(error) == "boom"

    def test_shape_mismatch(self) -> None:
        error = ShapeMismatchError("bad", shapes={"a": (1, 2), "b": (3,)})
        assert isinstance(error, ValidationError)
        assert error.error_code == "SHAPE_MISMATCH"
        assert error.details["shapes"] == {"a": [1, 2], "b": [3]}

    def test_config_key(self) -> None:
        error = ConfigValidationError("unknown", key="loss_weights.lambda_X")
        assert error.details["key"] == "loss_weights.lambda_X"
        assert error.exit_code == 2

    def test_non_finite_step(self) -> None:
        error = NonFiniteLossError("nan", step=12, details={"L_D_L": float("nan")})
        assert error.step == 12
        assert error.details["step"] == 12
        assert "L_D_L" in error.details

    @pytest.mark.parametrize("error,code", [
        (ValidationError("x"), 2),
        (CorpusError("x", path="p"), 2),
        (DegenerateQuadError("x"), 2),
        (NoRegionFoundError("x", attempts=64), 2),
        (NearHorizontalLightError("x"), 2),
        (NonFiniteLossError("x"), 3),
        (StorageError("x", path="p"), 1),
    ])
    def test_exit_codes(self, error: IllumCompError, code: int) -> None:
        assert error.exit_code == code
        assert error.to_dict()["exit_code"] == code

    def test_catchable_as_base(self) -> None:
        with pytest.raises(IllumCompError):
            raise NoRegionFoundError("none", attempts=3)
