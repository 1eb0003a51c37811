import os
import time
import logging
from datetime import timedelta


class LogFormatter(logging.Formatter):
    """Prefix every line with level, wall clock and time elapsed since start."""

    def __init__(self):
        super().__init__()
        self.start_time = time.time()

    def format(self, record):
        elapsed = timedelta(seconds=round(record.created - self.start_time))
        prefix = "%s - %s - %s - %s" % (
            record.levelname,
            time.strftime("%x %X", time.localtime(record.created)),
            elapsed,
            record.name,
        )
        message = record.getMessage()
        if record.exc_info:
            message = "%s\n%s" % (message, self.formatException(record.exc_info))
        if not message:
            return ""
        # keep continuation lines aligned under the message column
        message = message.replace("\n", "\n" + " " * (len(prefix) + 3))
        return "%s - %s" % (prefix, message)


def create_logger(filepath=None, rank=0, console_level=logging.INFO):
    """
    Install the fraglab handlers on the root logger.

    A DEBUG file handler is written to ``filepath`` (suffixed with ``-rank``
    for worker processes) and an INFO console handler goes to stderr.
    """
    log_formatter = LogFormatter()
    handlers = []

    if filepath is not None:
        if rank > 0:
            filepath = "%s-%i" % (filepath, rank)
        directory = os.path.dirname(filepath)
        if directory:
            os.makedirs(directory, exist_ok=True)
        file_handler = logging.FileHandler(filepath, "a")
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(log_formatter)
        handlers.append(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(console_level)
    console_handler.setFormatter(log_formatter)
    handlers.append(console_handler)

    logger = logging.getLogger()
    for handler in logger.handlers:
        handler.close()
    logger.handlers = handlers
    logger.setLevel(logging.DEBUG)

    def reset_time():
        log_formatter.start_time = time.time()

    logger.reset_time = reset_time
    return logger
