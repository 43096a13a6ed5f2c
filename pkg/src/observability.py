import logging
import os
import sys
from contextlib import contextmanager
from datetime import datetime
from functools import wraps
from typing import Any, Dict, Iterator, List, Optional

try:
    from langsmith import Client
    from langsmith.run_helpers import traceable
    LANGSMITH_AVAILABLE = True
except ImportError:
    LANGSMITH_AVAILABLE = False
    # Define dummy decorator if langsmith not available
    def traceable(name: Optional[str] = None):
        def decorator(func):
            return func
        return decorator

from .config import Config


def get_logger(name: str = "jointorbit") -> logging.Logger:
    if name != "jointorbit":
        name = f"jointorbit.{name.rsplit('.', 1)[-1]}"
    logger = logging.getLogger(name)
    root = logging.getLogger("jointorbit")
    if not root.handlers:
        # stdout carries reports; diagnostics go to stderr
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        root.addHandler(handler)
        root.setLevel(Config.LOG_LEVEL.upper())
        root.propagate = False
    return logger


logger = get_logger()


class WarningCollector:
    """Collects non-fatal findings of one run, in the order they were raised"""

    def __init__(self):
        self._messages: List[str] = []

    def warn(self, message: str) -> None:
        if message not in self._messages:
            self._messages.append(message)
        logger.warning(message)

    @property
    def messages(self) -> List[str]:
        return list(self._messages)


_active: List[WarningCollector] = []


@contextmanager
def collecting_warnings() -> Iterator[WarningCollector]:
    collector = WarningCollector()
    _active.append(collector)
    try:
        yield collector
    finally:
        _active.remove(collector)


def warn(message: str) -> None:
    """Record a warning on the innermost active collector (or just log it)"""
    if _active:
        _active[-1].warn(message)
    else:
        logger.warning(message)
    observability.log_warning(message)


class ObservabilityManager:
    def __init__(self):
        self.client = None
        self.enabled = False
        self._initialize_langsmith()

    def _initialize_langsmith(self):
        if not LANGSMITH_AVAILABLE:
            logger.debug("LangSmith not available - observability disabled")
            return

        if Config.LANGSMITH_API_KEY and Config.LANGSMITH_PROJECT:
            try:
                os.environ["LANGSMITH_API_KEY"] = Config.LANGSMITH_API_KEY
                os.environ["LANGSMITH_PROJECT"] = Config.LANGSMITH_PROJECT

                self.client = Client()
                self.enabled = True
                logger.info("LangSmith observability enabled for project: %s", Config.LANGSMITH_PROJECT)

            except Exception as e:
                logger.warning("Failed to initialize LangSmith: %s", e)
                self.enabled = False
        else:
            logger.debug("LangSmith credentials not configured - observability disabled")

    def log_analysis(
        self,
        kind: str,
        inputs: Dict[str, Any],
        outputs: Dict[str, Any],
        duration_ms: Optional[int] = None
    ):
        """Log a finished analysis run"""
        if not self.enabled:
            return

        try:
            run_data = {
                "name": f"{kind}_analysis",
                "run_type": "chain",
                "inputs": inputs,
                "outputs": {**outputs, "timestamp": datetime.now().isoformat()},
                "project_name": Config.LANGSMITH_PROJECT
            }

            if duration_ms:
                run_data["duration_ms"] = duration_ms

            self.client.create_run(**run_data)

        except Exception as e:
            logger.debug("Failed to log analysis: %s", e)

    def log_warning(self, message: str):
        if not self.enabled:
            return

        try:
            self.client.create_run(
                name="analysis_warning",
                run_type="chain",
                inputs={},
                outputs={"message": message, "timestamp": datetime.now().isoformat()},
                project_name=Config.LANGSMITH_PROJECT
            )
        except Exception as e:
            logger.debug("Failed to log warning: %s", e)

    def log_error(self, error_type: str, error_message: str, context: Dict[str, Any] = None):
        """Log errors for debugging"""
        if not self.enabled:
            return

        try:
            self.client.create_run(
                name="error_event",
                run_type="chain",
                inputs={
                    "error_type": error_type,
                    "context": context or {}
                },
                outputs={
                    "error_message": error_message,
                    "timestamp": datetime.now().isoformat()
                },
                project_name=Config.LANGSMITH_PROJECT
            )

        except Exception as e:
            logger.debug("Failed to log error: %s", e)


# Create global instance
observability = ObservabilityManager()


def trace_analysis(kind: str):
    """Decorator for analyzer entry points"""

    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            start_time = datetime.now()
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                logger.debug("%s failed: %s", kind, e)
                observability.log_error(
                    error_type=f"{kind}_error",
                    error_message=str(e),
                    context={"method": func.__name__}
                )
                raise

            duration = (datetime.now() - start_time).total_seconds() * 1000
            logger.debug("%s finished in %.1f ms", kind, duration)
            if observability.enabled:
                outputs = {"result_type": type(result).__name__}
                if hasattr(result, "model_dump"):
                    outputs = {k: v for k, v in result.model_dump().items() if isinstance(v, (int, str, bool))}
                observability.log_analysis(
                    kind=kind,
                    inputs={"method": func.__name__},
                    outputs=outputs,
                    duration_ms=int(duration)
                )
            return result

        if observability.enabled:
            return traceable(name=f"{kind}_analysis")(wrapper)
        return wrapper

    return decorator
