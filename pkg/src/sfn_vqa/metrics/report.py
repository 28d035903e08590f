"""
Metrics report emission: a CSV table and a human-readable aligned table.
"""

from pathlib import Path
from typing import Dict, List, Sequence

import pandas as pd

from sfn_vqa.core.exceptions import SFNError
from sfn_vqa.data.types import DatasetSplit
from sfn_vqa.metrics.scores import MetricsReport

COLUMNS = ["split", "category", "samples", "precision", "recall", "f1", "strict_accuracy", "bleu"]


def report_frame(reports: Dict[str, MetricsReport]) -> pd.DataFrame:
    """One 'all' row per split followed by its per-category rows."""
    rows = []
    for split, report in reports.items():
        rows.append(
            {
                "split": split,
                "category": "all",
                "samples": report.samples,
                "precision": report.precision,
                "recall": report.recall,
                "f1": report.f1,
                "strict_accuracy": report.strict_accuracy,
                "bleu": report.bleu,
            }
        )
        for category, scores in report.per_category.items():
            rows.append(
                {
                    "split": split,
                    "category": category.value,
                    "samples": scores.samples,
                    "precision": scores.precision,
                    "recall": scores.recall,
                    "f1": scores.f1,
                    "strict_accuracy": scores.strict_accuracy,
                    "bleu": scores.bleu,
                }
            )
    return pd.DataFrame(rows, columns=COLUMNS)


def format_table(reports: Dict[str, MetricsReport]) -> str:
    frame = report_frame(reports)
    return frame.to_string(index=False, float_format=lambda v: f"{v:.4f}") + "\n"


def write_metrics(reports: Dict[str, MetricsReport], out_dir, name: str = "metrics") -> List[Path]:
    """Write <name>.csv and <name>.txt into out_dir."""
    out_dir = Path(out_dir)
    csv_path, table_path = out_dir / f"{name}.csv", out_dir / f"{name}.txt"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        report_frame(reports).to_csv(csv_path, index=False, float_format="%.6f", lineterminator="\n")
        table_path.write_text(format_table(reports), encoding="utf-8")
    except OSError as e:
        raise SFNError(f"Cannot write metrics report to {out_dir}: {e}") from e
    return [csv_path, table_path]


def write_examples(split: DatasetSplit, predictions: Sequence[str], path, limit: int) -> Path:
    """First `limit` samples as image id, question tokens, target and prediction."""
    path = Path(path)
    lines = []
    for sample, prediction in list(zip(split, predictions))[:limit]:
        lines.append(
            f"{sample.image_id}\t{list(sample.tokens)}\ttarget: {sample.answer}\tprediction: {prediction}"
        )
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
    except OSError as e:
        raise SFNError(f"Cannot write exemplary results to {path}: {e}") from e
    return path
