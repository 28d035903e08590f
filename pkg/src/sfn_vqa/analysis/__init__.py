# __init__.py

from .stats import (
    AnalysisReport,
    CategoryStats,
    DistributionReport,
    ImageSizeRow,
    NGramTable,
    analyze_dataset,
    answer_class_stats,
    category_distribution,
    coverage_report,
    image_size_stats,
    ngram_counts,
)
from .resample import resample_split, shuffle_indices, validation_size, write_resampled
from .report import emit_report

__all__ = [
    "AnalysisReport",
    "CategoryStats",
    "DistributionReport",
    "ImageSizeRow",
    "NGramTable",
    "analyze_dataset",
    "answer_class_stats",
    "category_distribution",
    "coverage_report",
    "image_size_stats",
    "ngram_counts",
    "resample_split",
    "shuffle_indices",
    "validation_size",
    "write_resampled",
    "emit_report",
]
