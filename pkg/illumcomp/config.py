"""
illumcomp runtime configuration.

Centralizes environment-driven settings and paths. Domain configuration
(scene, network, training) lives in JSON files validated by pydantic models
next to the code they configure (SceneConfig in illumcomp.data.synth,
NetworkConfig in illumcomp.models.networks, TrainConfig in
illumcomp.training.config); this module only covers process-level knobs.

Environment Variables (also read from an optional .env file):
    ILLUMCOMP_DEBUG: Enable debug console logging (default: False)
    ILLUMCOMP_LOG_DIR: Log directory (default: <project>/logs)
    ILLUMCOMP_WORKERS: Worker processes for corpus generation (default: CPU count)

Usage:
    from illumcomp.config import Config

    workers = Config.WORKERS
    log_dir = Config.get_log_directory()
"""

import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()


class Config:
    """Central process-level configuration."""

    # ============= DEBUG MODE =============
    DEBUG: bool = os.getenv("ILLUMCOMP_DEBUG", "False").lower() == "true"

    # ============= PATHS =============
    PROJECT_ROOT: Path = Path(__file__).parent.parent
    LOGS_DIR: Path = Path(os.getenv("ILLUMCOMP_LOG_DIR", str(PROJECT_ROOT / "logs")))

    # ============= COMPUTE =============
    WORKERS: int = int(os.getenv("ILLUMCOMP_WORKERS", str(os.cpu_count() or 1)))

    # ============= FILE FORMATS =============
    CHECKPOINT_FORMAT_VERSION: int = 1
    IMAGE_FORMAT: str = "png8, linear mapping from [-1, 1] to [0, 255]"
    MASK_FORMAT: str = "png8 grayscale, linear mapping from [0, 1] to [0, 255]"

    @classmethod
    def get_log_directory(cls) -> Path:
        """Get log directory path, creating if needed."""
        cls.LOGS_DIR.mkdir(parents=True, exist_ok=True)
        return cls.LOGS_DIR
