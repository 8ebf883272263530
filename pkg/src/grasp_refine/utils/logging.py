"""Logging configuration for grasp-refine."""

import logging


def configure_logging(level: str = "info") -> None:
    """Configure logging for the CLI.

    Args:
        level: Log level name (debug, info, warn, error, critical)
    """
    level_map = {
        'debug': logging.DEBUG,
        'info': logging.INFO,
        'warn': logging.WARNING,
        'warning': logging.WARNING,
        'error': logging.ERROR,
        'critical': logging.CRITICAL
    }

    # Unknown names fall back to INFO
    numeric_level = level_map.get(level.lower(), logging.INFO)

    logging.basicConfig(
        level=numeric_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    logger = logging.getLogger('grasp_refine')
    logger.setLevel(numeric_level)


def get_logger(name: str) -> logging.Logger:
    """Get a logger instance for grasp-refine components.

    Args:
        name: Logger name (typically __name__)

    Returns:
        Configured logger instance
    """
    if name.startswith('grasp_refine.'):
        name = name[len('grasp_refine.'):]
    return logging.getLogger(f'grasp_refine.{name}')
