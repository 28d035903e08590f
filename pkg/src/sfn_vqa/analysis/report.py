"""
Write analysis results as CSV tables and PNG bar charts.
"""

from pathlib import Path
from typing import Dict, List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from sfn_vqa.analysis.stats import NGRAM_NAMES, AnalysisReport, DistributionReport  # noqa: E402
from sfn_vqa.core.exceptions import SFNError  # noqa: E402
from sfn_vqa.core.logging import get_logger  # noqa: E402
from sfn_vqa.data.types import CATEGORY_ORDER, ORIGINAL_CATEGORIES  # noqa: E402

logger = get_logger(__name__)

PLOT_TOP_K = 30
SKEW_COLUMNS = ["samples", "classes", "median_frequency", "classes_below_median", "fraction_below_median"]


def _write_csv(frame: pd.DataFrame, path: Path, written: List[Path]) -> None:
    try:
        frame.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    except OSError as e:
        raise SFNError(f"Cannot write report file {path}: {e}") from e
    written.append(path)


def _bar_chart(labels, values, title: str, path: Path, written: List[Path], horizontal: bool = True) -> None:
    fig, ax = plt.subplots(figsize=(8, max(2.5, 0.25 * len(labels) + 1)) if horizontal else (8, 4))
    try:
        # answers may hold "$"; tick labels are plain text, never mathtext
        names = [str(label) for label in labels]
        positions = list(range(len(names)))
        if horizontal:
            ax.barh(positions, list(values)[::-1])
            ax.set_yticks(positions, labels=names[::-1], parse_math=False)
        else:
            ax.bar(positions, list(values))
            ax.set_xticks(positions, labels=names, parse_math=False)
        ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="png")
    except OSError as e:
        raise SFNError(f"Cannot write plot {path}: {e}") from e
    finally:
        plt.close(fig)
    written.append(path)


def _skew_row(report: DistributionReport, category) -> Dict[str, object]:
    stats = report.categories[category]
    return {
        "samples": stats.samples,
        "classes": stats.classes,
        "median_frequency": stats.median_frequency,
        "classes_below_median": stats.classes_below_median,
        "fraction_below_median": round(stats.fraction_below_median, 6),
    }


def emit_report(report: AnalysisReport, out_dir, plots: bool = True) -> List[Path]:
    """
    Write every table of the report into out_dir and return the written paths.

    Tables: answers_<cat>.csv, questions_<cat>.csv, categories.csv, class_stats.csv,
    c4_skew.csv, ngrams.csv, unique_answers.csv, image_sizes.csv and, when a
    validation split was analyzed, unseen_<cat>.csv.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise SFNError(f"Cannot create report directory {out_dir}: {e}") from e
    written: List[Path] = []
    train = report.train

    for category in CATEGORY_ORDER:
        stats = train.categories[category]
        answers = pd.DataFrame(list(stats.histogram.items()), columns=["answer", "count"])
        _write_csv(answers, out_dir / f"answers_{category.value}.csv", written)
        prefixes = pd.DataFrame(list(stats.prefixes.items()), columns=["prefix", "count"])
        _write_csv(prefixes, out_dir / f"questions_{category.value}.csv", written)
        if train.unseen is not None:
            unseen = pd.DataFrame({"answer": train.unseen[category]}, columns=["answer"])
            _write_csv(unseen, out_dir / f"unseen_{category.value}.csv", written)

    categories = pd.DataFrame({"category": [c.value for c in CATEGORY_ORDER]})
    for split_name, counts in report.categories.items():
        categories[split_name] = [counts[c] for c in CATEGORY_ORDER]
    _write_csv(categories, out_dir / "categories.csv", written)

    class_stats = pd.DataFrame(
        [{"category": c.value, **_skew_row(train, c)} for c in CATEGORY_ORDER],
        columns=["category"] + SKEW_COLUMNS,
    )
    _write_csv(class_stats, out_dir / "class_stats.csv", written)
    _write_csv(pd.DataFrame([_skew_row(train, ORIGINAL_CATEGORIES[3])], columns=SKEW_COLUMNS), out_dir / "c4_skew.csv", written)

    ngrams = pd.DataFrame({"ngram": list(NGRAM_NAMES)})
    for category in ORIGINAL_CATEGORIES:
        ngrams[category.value] = list(report.ngrams.counts.get(category, (0, 0, 0, 0)))
    _write_csv(ngrams, out_dir / "ngrams.csv", written)
    unique = pd.DataFrame(
        {
            "category": [c.value for c in ORIGINAL_CATEGORIES],
            "unique_answers": [report.ngrams.unique_answers.get(c, 0) for c in ORIGINAL_CATEGORIES],
        }
    )
    _write_csv(unique, out_dir / "unique_answers.csv", written)

    sizes = pd.DataFrame(
        [(row.modality, row.width, row.height, row.images) for row in report.image_sizes],
        columns=["modality", "width", "height", "images"],
    )
    _write_csv(sizes, out_dir / "image_sizes.csv", written)

    if plots:
        _bar_chart(
            [c.value for c in CATEGORY_ORDER],
            categories["train"],
            "Samples per category (train)",
            out_dir / "categories.png",
            written,
            horizontal=False,
        )
        for category in CATEGORY_ORDER:
            stats = train.categories[category]
            top = list(stats.histogram.items())[:PLOT_TOP_K]
            _bar_chart([a for a, _ in top], [n for _, n in top], f"Answers {category.value}", out_dir / f"answers_{category.value}.png", written)
            top = list(stats.prefixes.items())[:PLOT_TOP_K]
            _bar_chart([p for p, _ in top], [n for _, n in top], f"Question prefixes {category.value}", out_dir / f"questions_{category.value}.png", written)
        labels = [f"{row.modality} {row.width}x{row.height}" for row in report.image_sizes]
        _bar_chart(labels, [row.images for row in report.image_sizes], "Original image sizes", out_dir / "image_sizes.png", written)

    logger.info(f"Wrote {len(written)} analysis files to {out_dir}")
    return written
