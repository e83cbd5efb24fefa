"""
Logging setup for the command line

Library modules only ask for `logging.getLogger(__name__)`; handlers are
installed here, once, by the CLI.
"""

import logging
import os
from pathlib import Path
from typing import Optional, Union

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def resolve_level(level: Optional[Union[str, int]] = None) -> int:
    """Explicit level, else PDEMINER_LOG_LEVEL, else INFO"""
    level = level if level is not None else os.getenv("PDEMINER_LOG_LEVEL", "INFO")
    if isinstance(level, int):
        return level
    resolved = logging.getLevelName(str(level).upper())
    return resolved if isinstance(resolved, int) else logging.INFO


def configure_logging(level: Optional[Union[str, int]] = None, log_file: Optional[Union[str, Path]] = None) -> None:
    handlers = [logging.StreamHandler()]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding='utf-8'))

    logging.basicConfig(level=resolve_level(level), format=LOG_FORMAT, handlers=handlers, force=True)


def attach_file_handler(log_file: Union[str, Path]) -> logging.Handler:
    """Mirror the root logger into a run directory; caller removes the handler when done"""
    handler = logging.FileHandler(log_file, encoding='utf-8')
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logging.getLogger().addHandler(handler)
    return handler
