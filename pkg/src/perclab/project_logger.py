import logging.config
import atexit
from datetime import datetime
from logging.handlers import QueueHandler

from .misc import PATH


# Track which loggers have been initialized
_initialized_loggers = set()

# Internal module constants
_MAIN_LOG_FILENAME = "log_main.log"
_WORKER_LOG_FILENAME = "log_worker.log"
_MAIN_QUEUE_HANDLER_NAME = "main_queue_handler"
_WORKER_QUEUE_HANDLER_NAME = "worker_queue_handler"
_MAIN_LOGGER_NAME = "perclab"
_WORKER_LOGGER_NAME = "perclab-worker"
_MAIN_LOG_PATH = PATH.LOGS_DIR / _MAIN_LOG_FILENAME
_WORKER_LOG_PATH = PATH.LOGS_DIR / _WORKER_LOG_FILENAME


def getMainLogger():
    """
    Returns reference to the main project logger
    """
    return logging.getLogger(_MAIN_LOGGER_NAME)


def getWorkerLogger():
    """
    Returns reference to the sample worker logger
    """
    return logging.getLogger(_WORKER_LOGGER_NAME)


def getLastLogEntries(number: int = 20) -> list[str]:
    """
    Returns the last [number] log entries from the main log file
    """
    if (not isinstance(number, int)) or (number < 1) or (number > 2000):
        getMainLogger().warning(f"Attempting to access invalid [{number}] log entries")
        return [f"[{str(datetime.now())}]: Error attempting to access log file"]

    try:
        with open(_MAIN_LOG_PATH) as logfile:
            # get last N lines, or less if < N
            return [line.rstrip("\n") for line in logfile.readlines()[-number:]]
    except Exception as err:
        getMainLogger().error(f"{err}")
        return [f"[{str(datetime.now())}]: Error attempting to access log file - {err}"]


def _logger_config(
    logger_names: list[str], handler_name: str, file_handler: str, path, console_level: str
) -> dict:
    """
    Build the dictConfig for one process role.
    Console output goes to stderr: stdout is reserved for machine-readable summaries.
    """
    return {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "simple": {
                "format": "%(levelname)s: %(message)s",
            },
            "detailed": {
                "format": "[%(levelname)s|%(module)s|L%(lineno)d] %(asctime)s: %(message)s",
                "datefmt": "%Y-%m-%dT%H:%M:%S%z",
            },
        },
        "handlers": {
            "stderr": {
                "class": "logging.StreamHandler",
                "formatter": "simple",
                "level": console_level,
                "stream": "ext://sys.stderr",
            },
            file_handler: {
                "class": "logging.handlers.RotatingFileHandler",
                "level": "DEBUG",
                "formatter": "detailed",
                "filename": path,
                "maxBytes": 1000000,
                "backupCount": 3,
            },
            handler_name: {
                "class": "logging.handlers.QueueHandler",
                "handlers": ["stderr", file_handler],
                "respect_handler_level": True,
            },
        },
        "loggers": {
            name: {
                "level": "DEBUG",
                "handlers": [handler_name],
                "propagate": False,
            }
            for name in logger_names
        },
    }


def _initLogger(label: str, console_level: str):
    """
    Internal function to initialize a logger.

    Args:
        label: Logger name (_MAIN_LOGGER_NAME or _WORKER_LOGGER_NAME)
        console_level: Minimum level echoed on stderr

    Raises:
        ValueError: If label doesn't match a known logger name
    """
    # Map label to the appropriate config and constants
    if label == _MAIN_LOGGER_NAME:
        init_key = "main"
        config = _logger_config(
            [_MAIN_LOGGER_NAME],
            _MAIN_QUEUE_HANDLER_NAME,
            "file-main",
            _MAIN_LOG_PATH,
            console_level,
        )
        handler_name = _MAIN_QUEUE_HANDLER_NAME
        logger_getter = getMainLogger
    elif label == _WORKER_LOGGER_NAME:
        init_key = "worker"
        config = _logger_config(
            # library modules log on the main logger name; inside a worker it goes to the worker file
            [_WORKER_LOGGER_NAME, _MAIN_LOGGER_NAME],
            _WORKER_QUEUE_HANDLER_NAME,
            "file-worker",
            _WORKER_LOG_PATH,
            console_level,
        )
        handler_name = _WORKER_QUEUE_HANDLER_NAME
        logger_getter = getWorkerLogger
    else:
        raise ValueError(f"Unknown logger label: {label}")

    # Check if already initialized
    if init_key in _initialized_loggers:
        logger_getter().warning("Ignoring attempt to init logger multiple times")
        return

    # Create logs directory if it doesn't exist
    PATH.LOGS_DIR.mkdir(parents=True, exist_ok=True)

    # Initialize the logger
    logging.config.dictConfig(config=config)
    qh = logging.getHandlerByName(handler_name)
    if qh is not None and isinstance(qh, QueueHandler) and qh.listener is not None:
        qh.listener.start()
        atexit.register(qh.listener.stop)
    _initialized_loggers.add(init_key)


def initMainLogger(verbose: bool = False):
    """
    Init coordinator logger.
    Run only once.
    """
    _initLogger(_MAIN_LOGGER_NAME, "DEBUG" if verbose else "INFO")


def initWorkerLogger():
    """
    Init sample worker logger. Called by the process pool initializer.
    Run only once per process.
    """
    _initLogger(_WORKER_LOGGER_NAME, "WARNING")
