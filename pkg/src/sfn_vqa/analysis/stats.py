"""
Dataset statistics: answer-class distributions, question prefixes, n-gram
counts, unseen answers between splits and original image sizes.
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from nltk.util import ngrams

from sfn_vqa.core.exceptions import DatasetError
from sfn_vqa.data.text import BINARY_ANSWERS, normalize_answer, preprocess_question
from sfn_vqa.data.types import ORIGINAL_CATEGORIES, CategoryLabel, DatasetSplit

NGRAM_ORDERS = (1, 2, 3, 4)
NGRAM_NAMES = ("unigram", "bigram", "trigram", "fourgram")
UNKNOWN_MODALITY = "unknown"


@dataclass(frozen=True)
class CategoryStats:
    samples: int
    histogram: Dict[str, int]  # answer -> count, most frequent first
    prefixes: Dict[str, int]  # first question tokens -> count
    median_frequency: float
    classes_below_median: int

    @property
    def classes(self) -> int:
        return len(self.histogram)

    @property
    def fraction_below_median(self) -> float:
        return self.classes_below_median / self.classes if self.classes else 0.0


@dataclass(frozen=True)
class DistributionReport:
    categories: Dict[CategoryLabel, CategoryStats]
    unseen: Optional[Dict[CategoryLabel, List[str]]] = None

    @property
    def c4_skew(self) -> CategoryStats:
        return self.categories[CategoryLabel.ABNORMALITY]


@dataclass(frozen=True)
class NGramTable:
    counts: Dict[CategoryLabel, Tuple[int, int, int, int]]
    unique_answers: Dict[CategoryLabel, int] = field(default_factory=dict)


@dataclass(frozen=True)
class ImageSizeRow:
    modality: str
    width: int
    height: int
    images: int


def _sorted_counter(counter: Counter) -> Dict[str, int]:
    # most_common keeps first-insertion order among equal counts
    return dict(counter.most_common())


def _require_answers(split: DatasetSplit) -> None:
    if not split.has_answers:
        raise DatasetError("Answer statistics need a split with answers")


def answer_class_stats(split: DatasetSplit, prefix_tokens: int = 3) -> DistributionReport:
    """Per derived category: sample count, answer histogram, question prefixes and skew."""
    _require_answers(split)
    report = {}
    for category, samples in split.by_category(derived=True).items():
        answers = Counter(normalize_answer(s.answer) for s in samples)
        prefixes = Counter(" ".join(s.tokens[:prefix_tokens]) for s in samples)
        frequencies = np.array(list(answers.values()), dtype=np.float64)
        median = float(np.median(frequencies)) if frequencies.size else 0.0
        report[category] = CategoryStats(
            samples=len(samples),
            histogram=_sorted_counter(answers),
            prefixes=_sorted_counter(prefixes),
            median_frequency=median,
            classes_below_median=int((frequencies < median).sum()),
        )
    return DistributionReport(categories=report)


def ngram_counts(split: DatasetSplit) -> NGramTable:
    """
    Distinct answer n-grams (n = 1..4) per ORIGINAL category.

    yes/no answers stay in C1 and C4 here; answers are tokenized with the
    question tokenizer.
    """
    _require_answers(split)
    counts, unique = {}, {}
    for category, samples in split.by_category(derived=False).items():
        if category not in ORIGINAL_CATEGORIES:
            continue
        distinct_answers = {normalize_answer(s.answer) for s in samples}
        per_order = []
        for n in NGRAM_ORDERS:
            grams = set()
            for answer in distinct_answers:
                grams.update(ngrams(preprocess_question(answer), n))
            per_order.append(len(grams))
        counts[category] = tuple(per_order)
        unique[category] = len(distinct_answers)
    return NGramTable(counts=counts, unique_answers=unique)


def coverage_report(train: DatasetSplit, valid: DatasetSplit) -> Dict[CategoryLabel, List[str]]:
    """Validation answers absent from the training answers of the same derived category."""
    _require_answers(train)
    _require_answers(valid)
    seen = {c: {normalize_answer(s.answer) for s in samples} for c, samples in train.by_category().items()}
    unseen = {}
    for category, samples in valid.by_category().items():
        missing: Dict[str, None] = {}
        for sample in samples:
            answer = normalize_answer(sample.answer)
            if answer not in seen[category]:
                missing.setdefault(answer, None)
        unseen[category] = list(missing)
    return unseen


def category_distribution(split: DatasetSplit) -> Dict[CategoryLabel, int]:
    return {category: len(samples) for category, samples in split.by_category(derived=True).items()}


def image_size_stats(split: DatasetSplit) -> List[ImageSizeRow]:
    """
    Distinct original (width, height) pairs per modality.

    An image's modality is the answer of one of its open C1 questions; images
    without such a question are reported as 'unknown'.
    """
    modality_of: Dict[str, str] = {}
    size_of: Dict[str, Tuple[int, int]] = {}
    for sample in split:
        size_of.setdefault(sample.image_id, (sample.image_width, sample.image_height))
        if (
            sample.original_category is CategoryLabel.MODALITY
            and sample.answer is not None
            and normalize_answer(sample.answer) not in BINARY_ANSWERS
        ):
            modality_of.setdefault(sample.image_id, normalize_answer(sample.answer))

    groups: Counter = Counter()
    for image_id, (width, height) in size_of.items():
        groups[(modality_of.get(image_id, UNKNOWN_MODALITY), width, height)] += 1
    return [
        ImageSizeRow(modality, width, height, count)
        for (modality, width, height), count in sorted(groups.items())
    ]


@dataclass(frozen=True)
class AnalysisReport:
    """Everything `analyze` emits for one dataset."""

    train: DistributionReport
    ngrams: NGramTable
    categories: Dict[str, Dict[CategoryLabel, int]]
    image_sizes: List[ImageSizeRow]
    valid: Optional[DistributionReport] = None


def analyze_dataset(train: DatasetSplit, valid: Optional[DatasetSplit] = None, prefix_tokens: int = 3) -> AnalysisReport:
    train_report = answer_class_stats(train, prefix_tokens)
    distributions = {"train": category_distribution(train)}
    valid_report = None
    if valid is not None:
        valid_report = answer_class_stats(valid, prefix_tokens)
        train_report = DistributionReport(categories=train_report.categories, unseen=coverage_report(train, valid))
        distributions["valid"] = category_distribution(valid)
    return AnalysisReport(
        train=train_report,
        ngrams=ngram_counts(train),
        categories=distributions,
        image_sizes=image_size_stats(train),
        valid=valid_report,
    )
