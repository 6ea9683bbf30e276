"""
Logging utilities for clusterfuse.
Provides structured logging for solver traces and experiment drivers.
"""

import logging
import os
import sys
from typing import Optional

import structlog

from config import LOG_LEVEL, LOG_DIR

_configured = False


def _configure_logging(log_level: str, log_dir: Optional[str]):
    """Configure structlog and the stdlib root logger once per process."""
    global _configured
    if _configured:
        return

    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.processors.UnicodeDecoder(),
            structlog.processors.JSONRenderer()
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    level = getattr(logging, log_level.upper(), logging.WARNING)
    root_logger = logging.getLogger("clusterfuse")
    root_logger.setLevel(level)
    root_logger.propagate = False

    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setFormatter(logging.Formatter("%(message)s"))
    root_logger.addHandler(stream_handler)

    # File logging is opt-in so result directories stay untouched
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
        file_handler = logging.FileHandler(os.path.join(log_dir, "clusterfuse.log"))
        file_handler.setFormatter(logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        ))
        root_logger.addHandler(file_handler)

    _configured = True


class ClusterFuseLogger:
    """Structured logger bound to one clusterfuse component."""

    def __init__(self, component: str, log_level: str = LOG_LEVEL):
        self.component = component
        self.log_level = log_level.upper()
        _configure_logging(self.log_level, LOG_DIR)
        self.logger = structlog.get_logger(f"clusterfuse.{component}")

    def info(self, message: str, **kwargs):
        """Log info message with context."""
        self.logger.info(message, component=self.component, **kwargs)

    def warning(self, message: str, **kwargs):
        """Log warning message with context."""
        self.logger.warning(message, component=self.component, **kwargs)

    def error(self, message: str, **kwargs):
        """Log error message with context."""
        self.logger.error(message, component=self.component, **kwargs)

    def debug(self, message: str, **kwargs):
        """Log debug message with context."""
        self.logger.debug(message, component=self.component, **kwargs)

    def solver_log(self, solver: str, **metrics):
        """Log one solver step (iteration, round or sweep)."""
        self.logger.debug("SOLVER_LOG", component=self.component,
                          solver=solver, **metrics)

    def performance_log(self, operation: str, duration: float, **kwargs):
        """Log wall-clock timing of an operation."""
        self.logger.info("PERFORMANCE_LOG", component=self.component,
                         operation=operation, duration_seconds=duration, **kwargs)


def get_logger(component: str, log_level: str = LOG_LEVEL) -> ClusterFuseLogger:
    """Factory function to create logger instances."""
    return ClusterFuseLogger(component, log_level)
