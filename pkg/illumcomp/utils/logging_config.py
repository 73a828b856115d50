"""
Centralized logging configuration for illumcomp.

Features:
- UTF-8 safe file handler
- Separate DEBUG (file) and INFO (console) levels
- Structured log format with timestamps and context
- Idempotent: repeated calls never stack duplicate handlers

Usage:
    from illumcomp.utils.logging_config import setup_logging
    logger = setup_logging("illumcomp")
    logger.info("Training started")
"""

import logging
from pathlib import Path
from typing import Optional

from illumcomp.config import Config


def setup_logging(
    name: str,
    log_file: Optional[Path] = None,
    level: int = logging.DEBUG,
    console_level: int = logging.INFO
) -> logging.Logger:
    """
    Configure logger with file and console handlers.

    Args:
        name: Logger name ("illumcomp" configures the whole package)
        log_file: Path to log file. If None, uses <log dir>/illumcomp.log
        level: Logger level (default: DEBUG)
        console_level: Console handler level (default: INFO)

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    if logger.handlers:
        return logger

    logger.setLevel(level)

    if log_file is None:
        log_file = Config.get_log_directory() / "illumcomp.log"
    else:
        log_file.parent.mkdir(parents=True, exist_ok=True)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.DEBUG if Config.DEBUG else console_level)
    console_handler.setFormatter(logging.Formatter(
        fmt="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    ))

    file_handler = logging.FileHandler(log_file, mode="a", encoding="utf-8")
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(logging.Formatter(
        fmt="%(asctime)s - %(name)s - %(levelname)s - [%(filename)s:%(lineno)d] - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S"
    ))

    logger.addHandler(console_handler)
    logger.addHandler(file_handler)

    return logger
