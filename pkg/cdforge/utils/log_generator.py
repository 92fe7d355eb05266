# cdforge/utils/log_generator.py

"""
Logger factory shared by every module.
Call sites pass context as keyword arguments: log.info("msg", log_key="Evolve", status="STARTED").
"""

import logging
import os
import sys

import structlog

_CONFIGURED = False


def _configure():
    global _CONFIGURED
    if _CONFIGURED:
        return

    level_name = os.environ.get("CDFORGE_LOG_LEVEL", "INFO").upper()
    level = logging.getLevelName(level_name)
    if not isinstance(level, int):
        level = logging.INFO

    if os.environ.get("CDFORGE_LOG_FORMAT", "console").lower() == "json":
        renderer = structlog.processors.JSONRenderer(sort_keys=True)
    else:
        renderer = structlog.dev.ConsoleRenderer(colors=False)

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso", utc=True),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=True,
    )
    _CONFIGURED = True


def setup_pipeline_logger(logger_name: str):
    """Return a structlog logger bound to the module name."""
    _configure()
    return structlog.get_logger(logger_name=logger_name)
