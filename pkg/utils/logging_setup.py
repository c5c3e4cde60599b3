# utils/logging_setup.py
import logging
import logging.handlers
from pathlib import Path
from typing import Optional

from config import settings

LOGGER_NAME = "choquard"


class ColoredFormatter(logging.Formatter):
    COLORS = {
        'DEBUG': '\033[36m',    # Cyan
        'INFO': '\033[32m',     # Green
        'WARNING': '\033[33m',  # Yellow
        'ERROR': '\033[31m',    # Red
        'CRITICAL': '\033[35m', # Magenta
        'RESET': '\033[0m'      # Reset
    }

    def __init__(self, *args, use_colors: bool = True, **kwargs):
        super().__init__(*args, **kwargs)
        self.use_colors = use_colors

    def format(self, record):
        if self.use_colors and getattr(record, 'color', False):
            level_color = self.COLORS.get(record.levelname, '')
            reset_color = self.COLORS['RESET']
            original_levelname = record.levelname
            record.levelname = f"{level_color}{record.levelname}{reset_color}"
            formatted = super().format(record)
            record.levelname = original_levelname
            return formatted
        return super().format(record)


def setup_logging(log_dir: Optional[str] = None, level: Optional[str] = None,
                  to_files: bool = True) -> logging.Logger:
    """Configure the ``choquard`` logger: colored console, rotating run and error logs.

    Args:
        log_dir: Directory for ``run.log`` / ``errors.log`` (defaults to settings.LOG_DIR)
        level: Level name overriding settings.LOG_LEVEL
        to_files: Attach the rotating file handlers

    Returns:
        logging.Logger: the configured logger
    """
    level_value = getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.INFO)

    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(level_value)
    for handler in list(logger.handlers):
        handler.close()
    logger.handlers.clear()

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level_value)
    console_handler.setFormatter(ColoredFormatter(
        fmt='%(asctime)s | %(levelname)-8s | %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S',
        use_colors=settings.LOG_COLORS.lower() == "true",
    ))
    logger.addHandler(console_handler)

    if to_files:
        logs_dir = Path(log_dir or settings.LOG_DIR)
        logs_dir.mkdir(parents=True, exist_ok=True)
        file_formatter = logging.Formatter(
            fmt='%(asctime)s | %(levelname)-8s | %(name)s | %(funcName)s:%(lineno)d | %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )

        file_handler = logging.handlers.RotatingFileHandler(
            filename=logs_dir / "run.log",
            maxBytes=settings.LOG_MAX_FILE_SIZE,
            backupCount=settings.LOG_BACKUP_COUNT,
            encoding='utf-8'
        )
        file_handler.setLevel(level_value)
        file_handler.setFormatter(file_formatter)

        error_handler = logging.handlers.RotatingFileHandler(
            filename=logs_dir / "errors.log",
            maxBytes=5 * 1024 * 1024,  # 5MB
            backupCount=3,
            encoding='utf-8'
        )
        error_handler.setLevel(logging.ERROR)
        error_handler.setFormatter(file_formatter)

        logger.addHandler(file_handler)
        logger.addHandler(error_handler)

    logger.propagate = False
    return logger
