# __init__.py

from .logging import close_run_log, get_logger, setup_logging
from .exceptions import (
    CheckpointError,
    ConfigError,
    DatasetError,
    MetricError,
    ModelError,
    SamplingError,
    SFNError,
    StageError,
)
from .decorators import log_stage_execution
from .session import (
    start_session,
    end_session,
    get_session_logger,
    log_stage_call,
    get_current_session_id,
)
__all__ = [
    "get_logger",
    "setup_logging",
    "close_run_log",
    "SFNError",
    "DatasetError",
    "ConfigError",
    "ModelError",
    "CheckpointError",
    "StageError",
    "SamplingError",
    "MetricError",
    "log_stage_execution",
    "start_session",
    "end_session",
    "get_session_logger",
    "log_stage_call",
    "get_current_session_id",
]
