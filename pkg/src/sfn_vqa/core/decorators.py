"""
This module contains decorators for use across the pipeline.
"""

import functools
import time

from sfn_vqa.core.logging import get_logger
from sfn_vqa.core.session import log_stage_call


def log_stage_execution(func):
    """
    A decorator to log the execution of a pipeline stage, including its name,
    duration, and success or failure, to the session telemetry log.
    """

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        logger = get_logger(func.__module__)
        stage_name = func.__name__
        stage_data = {
            "stage": stage_name,
            "status": "unknown",
        }
        logger.info(f"Running stage: {stage_name}")
        started = time.perf_counter()
        try:
            result = func(*args, **kwargs)
            elapsed = time.perf_counter() - started
            logger.info(f"Stage '{stage_name}' finished in {elapsed:.1f}s.")
            stage_data["status"] = "success"
            stage_data["seconds"] = round(elapsed, 3)
            log_stage_call(stage_data)
            return result
        except Exception as e:
            logger.error(f"Error in stage '{stage_name}': {e}", exc_info=True)
            stage_data["status"] = "failure"
            stage_data["error"] = str(e)
            log_stage_call(stage_data)
            raise

    return wrapper
