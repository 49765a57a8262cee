"""Logging setup for the histreg command line."""

from __future__ import annotations

import logging

from rich.console import Console
from rich.logging import RichHandler

from histreg.utils.config import Settings

# Diagnostics go to stderr so that stdout stays machine readable.
console = Console(stderr=True)

_HANDLER_ATTR = "_histreg_handler"


def setup_logging(level: str | int | None = None, settings: Settings | None = None) -> logging.Logger:
    """Configure the ``histreg`` logger and return it.

    ``level`` wins over ``settings.logging.level``; without either the level is INFO.
    Calling this again replaces the handlers installed by the previous call.
    """
    logger = logging.getLogger("histreg")
    for handler in [h for h in logger.handlers if getattr(h, _HANDLER_ATTR, False)]:
        logger.removeHandler(handler)
        handler.close()

    if level is None:
        level = settings.logging.level if settings is not None else "INFO"
    logger.setLevel(level)
    logger.propagate = False

    rich_handler = RichHandler(console=console, show_path=False, rich_tracebacks=False)
    rich_handler.setFormatter(logging.Formatter("%(message)s"))
    setattr(rich_handler, _HANDLER_ATTR, True)
    logger.addHandler(rich_handler)

    if settings is not None and settings.logging.file_name:
        try:
            settings.paths.log_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            logger.warning("Cannot create log directory %s: %s", settings.paths.log_dir, exc)
        else:
            file_handler = logging.FileHandler(
                settings.paths.log_dir / settings.logging.file_name, encoding="utf-8"
            )
            file_handler.setFormatter(logging.Formatter(settings.logging.format))
            setattr(file_handler, _HANDLER_ATTR, True)
            logger.addHandler(file_handler)
    return logger
