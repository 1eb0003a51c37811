import time
import logging
import functools

logger = logging.getLogger(__name__)


def timing_decorator(func):
    """
    Log how long ``func`` took, at INFO level, once it returns.

    @param func - function to be benchmarked (typically an experiment runner).

    @return the wrapped function; its return value is passed through unchanged.
    """

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.perf_counter()
        result = func(*args, **kwargs)
        logger.info("%s took %.3f s" % (func.__name__, time.perf_counter() - start_time))
        return result

    return wrapper
