"""
Global logging configuration for the SFN pipeline.
"""

import logging
import sys
from pathlib import Path
from typing import Optional


class LoggingConfig:
    """Configuration constants for logging."""

    DEFAULT_LOG_LEVEL = "INFO"
    ENCODING = "utf-8"
    FILE_FORMAT = "%(asctime)s - %(levelname)s - %(name)s - %(message)s"
    CONSOLE_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"

    NOISY_LOGGERS = [
        "matplotlib",
        "PIL",
        "urllib3",
        "nltk",
    ]


class GlobalLogger:
    """Handles global application logging."""

    def __init__(self):
        self._logger = logging.getLogger("sfn_vqa")
        self._setup_complete = False
        self._file_handler: Optional[logging.Handler] = None

    def setup(
        self,
        log_level: str = LoggingConfig.DEFAULT_LOG_LEVEL,
        log_file: Optional[str] = None,
        disable_logging: bool = False,
    ) -> None:
        """Setup global logging configuration."""
        if disable_logging or log_level.upper() == "OFF":
            logging.disable(logging.CRITICAL)
            return
        logging.disable(logging.NOTSET)

        if log_level.upper() == "QUIET":
            log_level = "CRITICAL"

        root_logger = logging.getLogger()
        numeric_level = getattr(logging, log_level.upper(), logging.INFO)
        root_logger.setLevel(numeric_level)

        if not self._setup_complete:
            root_logger.handlers.clear()
            console_formatter = logging.Formatter(LoggingConfig.CONSOLE_FORMAT)
            self._add_handler(root_logger, logging.StreamHandler(sys.stderr), console_formatter)
            self._suppress_noisy_loggers()
            self._setup_complete = True

        if log_file is not None:
            self._attach_file_handler(root_logger, Path(log_file))

    def _attach_file_handler(self, root_logger: logging.Logger, log_file_path: Path) -> None:
        """Route logs of the current run into log_file_path (one file per run)."""
        if self._file_handler is not None:
            root_logger.removeHandler(self._file_handler)
            self._file_handler.close()
            self._file_handler = None
        try:
            log_file_path.parent.mkdir(parents=True, exist_ok=True)
            handler = logging.FileHandler(log_file_path, encoding=LoggingConfig.ENCODING)
            self._add_handler(root_logger, handler, logging.Formatter(LoggingConfig.FILE_FORMAT))
            self._file_handler = handler
        except Exception as e:
            print(
                f"Warning: Failed to create log file {log_file_path}: {e}",
                file=sys.stderr,
            )

    def close_file_handler(self) -> None:
        """Detach and close the per-run file handler, if any."""
        if self._file_handler is not None:
            logging.getLogger().removeHandler(self._file_handler)
            self._file_handler.close()
            self._file_handler = None

    def _suppress_noisy_loggers(self) -> None:
        """Suppress commonly noisy third-party loggers."""
        for logger_name in LoggingConfig.NOISY_LOGGERS:
            logging.getLogger(logger_name).setLevel(logging.WARNING)

    def _add_handler(
        self, logger: logging.Logger, handler: logging.Handler, formatter: logging.Formatter
    ) -> None:
        """Helper function to configure and add a handler to the logger."""
        handler.setFormatter(formatter)
        logger.addHandler(handler)

    def get_logger(self, name: Optional[str] = None) -> logging.Logger:
        """Get a logger instance."""
        if not self._setup_complete:
            self.setup()  # Auto-setup with defaults if not already done
        if name:
            return logging.getLogger(name)
        return self._logger


# Global instance
_global_logger = GlobalLogger()


# Public API
def setup_logging(
    log_level: str = LoggingConfig.DEFAULT_LOG_LEVEL,
    log_file: Optional[str] = None,
    disable_logging: bool = False,
) -> None:
    """Setup global logging configuration."""
    _global_logger.setup(log_level, log_file, disable_logging)


def close_run_log() -> None:
    """Close the file handler opened for the current run."""
    _global_logger.close_file_handler()


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """Get a logger instance."""
    return _global_logger.get_logger(name)
