"""
Logging configuration for npg-lab.

Console output carries the plain message; the rotating log file additionally
carries the structured context attached through ``StructuredLogger``.
"""

import logging
import logging.handlers
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional, Union

from npg_lab.utils.config import LOG_DIR

_CONFIGURED = False


class ContextFormatter(logging.Formatter):
    """Formatter that tolerates records logged without context."""

    def format(self, record: logging.LogRecord) -> str:
        if not hasattr(record, "context"):
            record.context = "{}"
        return super().format(record)


def setup_logging(
    level: Union[int, str] = logging.INFO, log_dir: Optional[Union[str, Path]] = None
) -> Path:
    """
    Set up console and rotating-file handlers on the root logger.

    Calling it again only adjusts the level.

    Args:
        level: Logging level, as a number or a name such as ``"DEBUG"``.
        log_dir: Directory for log files. Defaults to ``NPG_LAB_LOG_DIR``.

    Returns:
        Path: The directory log files are written to.
    """
    global _CONFIGURED

    directory = Path(log_dir if log_dir is not None else LOG_DIR)
    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    if _CONFIGURED:
        return directory

    directory.mkdir(parents=True, exist_ok=True)
    log_filename = directory / f"npg_lab_{datetime.now().strftime('%Y%m%d_%H%M%S')}.log"

    console_formatter = ContextFormatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    )
    file_formatter = ContextFormatter(
        "%(asctime)s - %(name)s - %(levelname)s - %(message)s - %(context)s"
    )

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(console_formatter)

    file_handler = logging.handlers.RotatingFileHandler(
        log_filename,
        maxBytes=10485760,  # 10MB
        backupCount=5,
    )
    file_handler.setFormatter(file_formatter)

    root_logger.addHandler(console_handler)
    root_logger.addHandler(file_handler)
    _CONFIGURED = True
    return directory


class StructuredLogger:
    """
    A logger that attaches key-value context to every message.
    """

    def __init__(self, name: str) -> None:
        """
        Wrap the standard logger of the given name.

        Args:
            name: Logger name, usually the module's ``__name__``.
        """
        self.logger = logging.getLogger(name)
        self.context: Dict[str, Any] = {}

    def set_context(self, **kwargs: Any) -> None:
        """
        Set context values for subsequent messages.

        Args:
            **kwargs: Key-value pairs merged into the context, e.g. ``seed=7``.
        """
        self.context.update(kwargs)

    def clear_context(self) -> None:
        """Drop all context values."""
        self.context.clear()

    def _log(self, level: int, msg: str, **kwargs: Any) -> None:
        """
        Emit a record carrying the merged context.

        Args:
            level: The logging level.
            msg: The message.
            **kwargs: Context for this message only.
        """
        if not self.logger.isEnabledFor(level):
            return
        context = {**self.context, **kwargs}
        self.logger.log(level, msg, extra={"context": str(context)})

    def info(self, msg: str, **kwargs: Any) -> None:
        """Log a run-level event with context."""
        self._log(logging.INFO, msg, **kwargs)

    def debug(self, msg: str, **kwargs: Any) -> None:
        """Log per-iteration detail with context."""
        self._log(logging.DEBUG, msg, **kwargs)

    def warning(self, msg: str, **kwargs: Any) -> None:
        """Log a recoverable anomaly with context."""
        self._log(logging.WARNING, msg, **kwargs)

    def error(self, msg: str, **kwargs: Any) -> None:
        """Log a failure with context."""
        self._log(logging.ERROR, msg, **kwargs)
