"""
Logging helpers for the fracns package.

The package never installs handlers on import; the command-line entry point
calls :func:`configure_logging` once.
"""

from __future__ import annotations

import logging
from typing import Optional

LOG_FORMAT = "[%(levelname)s] %(name)s: %(message)s"
ROOT_LOGGER = "fracns"


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """Return a logger below the ``fracns`` namespace."""
    if not name:
        return logging.getLogger(ROOT_LOGGER)
    if name == ROOT_LOGGER or name.startswith(ROOT_LOGGER + "."):
        return logging.getLogger(name)
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")


def configure_logging(level: int = logging.INFO) -> logging.Logger:
    """Attach a single stream handler to the package logger."""
    logger = logging.getLogger(ROOT_LOGGER)
    for handler in list(logger.handlers):
        if getattr(handler, "_fracns_handler", False):
            logger.removeHandler(handler)

    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._fracns_handler = True  # type: ignore[attr-defined]
    logger.addHandler(handler)
    logger.setLevel(level)
    return logger
