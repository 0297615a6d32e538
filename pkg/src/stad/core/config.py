"""
Environment-driven settings for the student-teacher anomaly detection package.

Run hyperparameters live in ``stad.models.run_config.RunConfig``; this module only
holds process-level settings that can be overridden via environment variables.
"""

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Tuple

from dotenv import load_dotenv

# Load environment variables from .env file
env_path = Path('.env')
if env_path.exists():
    load_dotenv(dotenv_path=env_path)

# =============================================================================
# CORE APPLICATION SETTINGS
# =============================================================================

@dataclass
class AppConfig:
    """Core application configuration."""
    version: str = field(default_factory=lambda: os.getenv('STAD_VERSION', '0.1.0'))
    debug: bool = field(default_factory=lambda: os.getenv('DEBUG', 'false').lower() == 'true')


@dataclass
class LoggingConfig:
    """Logging configuration."""
    level: str = field(default_factory=lambda: os.getenv('LOG_LEVEL', 'INFO'))
    log_file: str = field(default_factory=lambda: os.getenv('LOG_FILE', ''))

# =============================================================================
# PATHS
# =============================================================================

@dataclass
class PathsConfig:
    """Filesystem roots."""
    run_root: str = field(default_factory=lambda: os.getenv('STAD_RUN_ROOT', str(Path.cwd() / 'runs')))
    data_root: str = field(default_factory=lambda: os.getenv('STAD_DATA_ROOT', str(Path.cwd() / 'data')))

# =============================================================================
# COMPUTE
# =============================================================================

@dataclass
class ComputeConfig:
    """Parallelism settings."""
    num_workers: int = field(default_factory=lambda: int(os.getenv('STAD_NUM_WORKERS', '1')))
    # Budget for caching normalized teacher maps during student training
    target_cache_mb: int = field(default_factory=lambda: int(os.getenv('STAD_TARGET_CACHE_MB', '2048')))

# =============================================================================
# MAIN CONFIGURATION CLASS
# =============================================================================

@dataclass
class Config:
    """Aggregates all environment configuration sections."""
    app: AppConfig = field(default_factory=AppConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    compute: ComputeConfig = field(default_factory=ComputeConfig)


config = Config()

APP_VERSION = config.app.version


def validate_config() -> Tuple[bool, List[str]]:
    """
    Validate the environment settings.

    Returns:
        Tuple of (is_valid, problems)
    """
    problems = []
    if config.logging.level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        problems.append(f"LOG_LEVEL={config.logging.level}")
    if config.compute.num_workers < 1:
        problems.append(f"STAD_NUM_WORKERS={config.compute.num_workers} (must be >= 1)")
    if config.compute.target_cache_mb < 0:
        problems.append(f"STAD_TARGET_CACHE_MB={config.compute.target_cache_mb} (must be >= 0)")
    return len(problems) == 0, problems


def get_default_settings() -> Dict[str, Any]:
    """Process-level defaults reported by ``show-config``."""
    return {
        "run_root": config.paths.run_root,
        "data_root": config.paths.data_root,
        "num_workers": config.compute.num_workers,
        "target_cache_mb": config.compute.target_cache_mb,
        "log_level": config.logging.level,
    }


def create_env_template() -> str:
    """Create a template .env file with all available configuration options."""
    return """# Student-teacher anomaly detection configuration
# Copy this file to .env and adjust

# =============================================================================
# LOGGING CONFIGURATION
# =============================================================================
LOG_LEVEL=INFO
# LOG_FILE=./stad.log

# =============================================================================
# PATHS
# =============================================================================
STAD_RUN_ROOT=./runs
STAD_DATA_ROOT=./data

# =============================================================================
# COMPUTE
# =============================================================================
STAD_NUM_WORKERS=1
STAD_TARGET_CACHE_MB=2048
"""


def print_config_summary():
    """Print a summary of the current configuration."""
    print("=== Student-Teacher Anomaly Detection Configuration ===")
    print(f"Version: {config.app.version}")
    print(f"Debug Mode: {config.app.debug}")
    print(f"Log Level: {config.logging.level}")
    print(f"Run Root: {config.paths.run_root}")
    print(f"Data Root: {config.paths.data_root}")
    print(f"Workers: {config.compute.num_workers}")
    print(f"Target Cache (MB): {config.compute.target_cache_mb}")
    print("=" * 50)
