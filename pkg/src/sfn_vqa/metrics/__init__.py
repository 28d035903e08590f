# __init__.py

from .scores import (
    BLEU_VARIANTS,
    CategoryScores,
    MetricsReport,
    bleu,
    compute_report,
    precision_recall_f1,
    sentence_bleu_unsmoothed,
    strict_accuracy,
)
from .report import format_table, report_frame, write_examples, write_metrics

__all__ = [
    "BLEU_VARIANTS",
    "CategoryScores",
    "MetricsReport",
    "bleu",
    "compute_report",
    "precision_recall_f1",
    "sentence_bleu_unsmoothed",
    "strict_accuracy",
    "format_table",
    "report_frame",
    "write_examples",
    "write_metrics",
]
