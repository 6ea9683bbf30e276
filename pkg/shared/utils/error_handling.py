"""
Error handling utilities for clusterfuse.
Provides the exception hierarchy, CLI exit codes, and a failure ledger for sweeps.
"""

from collections import Counter
from dataclasses import dataclass, asdict, field
from datetime import datetime, timezone
from functools import wraps
from typing import Callable, Any, Dict, List, Optional

from .logging import get_logger

EXIT_OK = 0
EXIT_NOT_CONVERGED = 10


class ClusterFuseError(Exception):
    """Base exception for all clusterfuse failures."""
    exit_code = 1


class ParameterError(ClusterFuseError, ValueError):
    """Invalid tuning parameter, cluster count, scenario name or grid."""
    exit_code = 2


class DataFormatError(ClusterFuseError):
    """Input file is missing or cannot be parsed."""
    exit_code = 3


class DegenerateClassError(ClusterFuseError):
    """A class has too few observations for the requested operation."""
    exit_code = 4


class DimensionMismatchError(ClusterFuseError, ValueError):
    """Shapes disagree, or a matrix that must be symmetric is not."""
    exit_code = 5


class DomainError(ClusterFuseError, ValueError):
    """Argument outside the mathematical domain (e.g. not positive definite)."""
    exit_code = 6


class NumericError(ClusterFuseError, ArithmeticError):
    """Factorization or line-search breakdown."""
    exit_code = 7


class InitializationError(ClusterFuseError):
    """Starting point cannot be formed from the data."""
    exit_code = 8


class PersistenceError(ClusterFuseError):
    """Model or result file could not be written or read back."""
    exit_code = 9


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the CLI exit code."""
    if isinstance(error, ClusterFuseError):
        return error.exit_code
    return 1


@dataclass
class ErrorEvent:
    """Structured record of one failed job."""
    error_type: str
    error_message: str
    timestamp: str
    context: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for serialization."""
        return asdict(self)


class ErrorRecoveryManager:
    """Records failures of independent jobs so a sweep can continue past them."""

    def __init__(self, component: str):
        self.component = component
        self.logger = get_logger(f"{component}_recovery")
        self.error_history: List[ErrorEvent] = []

    def handle_error(self, error: Exception, context: Optional[Dict[str, Any]] = None) -> ErrorEvent:
        """Record the error on the ledger and log it."""
        error_type = type(error).__name__
        event = ErrorEvent(
            error_type=error_type,
            error_message=str(error),
            timestamp=datetime.now(timezone.utc).isoformat(),
            context=context or {},
        )
        self.error_history.append(event)
        self.logger.warning("Error recorded", **event.to_dict())
        return event

    def get_error_statistics(self) -> Dict[str, Any]:
        """Summarise recorded failures."""
        if not self.error_history:
            return {"total_errors": 0}

        error_counts = Counter(event.error_type for event in self.error_history)
        return {
            "total_errors": len(self.error_history),
            "error_counts": dict(error_counts),
            "most_common_error": error_counts.most_common(1)[0][0],
        }


def with_error_handling(component: str):
    """Decorator that records any failure on the component ledger and re-raises it."""
    def decorator(func: Callable) -> Callable:
        recovery_manager = ErrorRecoveryManager(component)

        @wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except Exception as e:
                context = {
                    "function": func.__name__,
                    "args": str(args)[:100],  # Truncate for logging
                    "kwargs": str(kwargs)[:100]
                }
                recovery_manager.handle_error(e, context)
                raise

        wrapper.recovery_manager = recovery_manager
        return wrapper
    return decorator
