"""Console logging for nonlocal_maxwell: colored on terminals, plain when redirected."""

import json
import logging
import sys
from typing import Optional

from .common import exists

PACKAGE = "nonlocal_maxwell"


class CustomFormatter(logging.Formatter):
    COLORS = {
        "DEBUG": "\033[94m",
        "INFO": "\033[0m",
        "WARNING": "\033[93m",
        "ERROR": "\033[91m",
        "CRITICAL": "\033[1;91m",
    }
    RESET = "\033[0m"

    def __init__(self, timestamp: bool = False, color: bool = True, datefmt: str = "%Y-%m-%d %H:%M:%S"):
        fmt = "%(name)s - %(levelname)s - %(message)s"
        if timestamp:
            fmt = "%(asctime)s - " + fmt
        super().__init__(fmt, datefmt)
        self.color = color

    def format(self, record: logging.LogRecord) -> str:
        # reports and configs are logged as dicts
        if isinstance(record.msg, dict):
            record.msg = json.dumps(record.msg, indent=4, sort_keys=True, default=float)

        message = super().format(record)
        if not self.color:
            return message
        return self.COLORS.get(record.levelname, self.COLORS["INFO"]) + message + self.RESET


def _stream_is_tty() -> bool:
    return hasattr(sys.stderr, "isatty") and sys.stderr.isatty()


def setup_logger(name: str, timestamp: bool = False, level: Optional[int] = None) -> logging.Logger:
    """
    Logger with one stderr handler; stdout stays free for reports.

    Module loggers are left at NOTSET so that `set_package_level` controls them.
    """
    logger = logging.getLogger(name)

    if exists(level):
        logger.setLevel(level)

    if not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(CustomFormatter(timestamp=timestamp, color=_stream_is_tty()))
        logger.addHandler(handler)

    logger.propagate = False

    return logger


def set_package_level(level: int, timestamp: bool = False) -> None:
    """Set the level of every package logger created so far and restyle its handlers."""
    setup_logger(PACKAGE, level=level)
    formatter = CustomFormatter(timestamp=timestamp, color=_stream_is_tty())
    for name in list(logging.root.manager.loggerDict):
        if name == PACKAGE or name.startswith(PACKAGE + "."):
            logger = logging.getLogger(name)
            logger.setLevel(level)
            for handler in logger.handlers:
                handler.setFormatter(formatter)
