import logging
import os
from datetime import datetime

FORMAT = "%(asctime)s - %(levelname)s - %(message)s"

# Library modules log under these names; the CLI attaches handlers once.
LOGGER_NAMES = ("utils", "nodes", "flow", "cli")


def configure_logging(verbose: bool = False, log_directory: str | None = None) -> str:
    """Send run logs to LOG_DIR/lbs_runs_YYYYMMDD.log, and to stderr when verbose.

    Returns the log file path.
    """
    log_directory = log_directory or os.getenv("LOG_DIR", "logs")
    os.makedirs(log_directory, exist_ok=True)
    log_file = os.path.join(log_directory, f"lbs_runs_{datetime.now().strftime('%Y%m%d')}.log")

    formatter = logging.Formatter(FORMAT)

    file_handler = logging.FileHandler(log_file, encoding="utf-8")
    file_handler.setFormatter(formatter)

    stderr_handler = logging.StreamHandler()
    stderr_handler.setFormatter(formatter)

    for name in LOGGER_NAMES:
        logger = logging.getLogger(name)
        logger.setLevel(logging.DEBUG if verbose else logging.INFO)
        logger.propagate = False  # keep runs out of the root logger
        for handler in list(logger.handlers):
            logger.removeHandler(handler)
            handler.close()
        logger.addHandler(file_handler)
        if verbose:
            logger.addHandler(stderr_handler)

    return log_file
