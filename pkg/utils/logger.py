# utils/logger.py
"""
Loguru setup shared by every module.

stderr carries progress and warnings; stdout is left to the results the
CLI prints. When ZSL_LOG_DIR is set, rotating text logs and a JSONL stream
of the structured context (component, action, step, objective) are written
there as well.
"""

from loguru import logger
import os
import sys
from pathlib import Path
from typing import Optional


CONSOLE_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)
FILE_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}"

# (file name pattern, level, rotation, retention, serialize)
FILE_SINKS = (
    ("zsl_{time:YYYY-MM-DD}.log", "DEBUG", "500 MB", "10 days", False),
    ("errors_{time:YYYY-MM-DD}.log", "ERROR", "100 MB", "30 days", False),
    ("runs_{time:YYYY-MM-DD}.jsonl", "INFO", "500 MB", "10 days", True),
)


class ZslLogger:
    """Global logger wrapper with component and solver-step helpers"""

    def __init__(self, log_level: Optional[str] = None, log_dir: Optional[str] = None):
        self.logger = logger
        self.configure(
            log_level or os.getenv("ZSL_LOG_LEVEL", "INFO"),
            log_dir if log_dir is not None else os.getenv("ZSL_LOG_DIR"),
        )

    def configure(self, log_level: str = "INFO", log_dir: Optional[str] = None):
        """
        Reinstall all sinks.

        Args:
            log_level: Minimum level for the console sink
            log_dir: Directory for rotating log files, or None for console only
        """
        logger.remove()
        logger.add(sys.stderr, format=CONSOLE_FORMAT, level=log_level.upper(), colorize=True)

        if not log_dir:
            return
        directory = Path(log_dir)
        directory.mkdir(parents=True, exist_ok=True)
        for pattern, level, rotation, retention, serialize in FILE_SINKS:
            options = {"serialize": True} if serialize else {"format": FILE_FORMAT}
            logger.add(
                str(directory / pattern),
                level=level,
                rotation=rotation,
                retention=retention,
                **options,
            )

    def _log_action(self, level: str, message: str, component: str, action: str, **context):
        self.logger.log(level, message, extra={"component": component, "action": action, **context})

    def log_component_start(self, component: str, **context):
        """Log the start of a pipeline stage or solver run"""
        self._log_action("INFO", f"🚀 STARTING: {component}", component, "start", **context)

    def log_component_complete(self, component: str, duration: float, **context):
        """Log a finished stage with its wall time in seconds"""
        self._log_action(
            "INFO", f"✅ COMPLETED: {component} in {duration:.2f}s", component, "complete",
            duration=duration, **context,
        )

    def log_iteration(self, component: str, step: int, objective: float, **context):
        """One solver step at DEBUG level"""
        self._log_action(
            "DEBUG", f"🔁 {component} step {step}: objective={objective:.10g}", component, "iteration",
            step=step, objective=objective, **context,
        )


zsl_logger = ZslLogger()
