"""
Answer scoring: macro precision / recall / F1, strict accuracy and BLEU.

All metrics compare answers after trim + lowercase, the same normalization the
answer dictionaries use. BLEU tokenizes with the question tokenizer.
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from nltk.translate.bleu_score import SmoothingFunction, corpus_bleu, sentence_bleu
from nltk.util import ngrams
from sklearn.metrics import precision_recall_fscore_support

from sfn_vqa.core.exceptions import MetricError
from sfn_vqa.data.text import normalize_answer, preprocess_question
from sfn_vqa.data.types import CATEGORY_ORDER, CategoryLabel

BLEU_WEIGHTS = (0.25, 0.25, 0.25, 0.25)
BLEU_VARIANTS = ("sentence", "sentence_smoothed", "corpus")


def _check_pairs(predictions: Sequence[str], gold: Sequence[str]) -> None:
    if len(predictions) != len(gold):
        raise MetricError(f"{len(predictions)} predictions but {len(gold)} gold answers")
    if not gold:
        raise MetricError("Metrics need at least one (prediction, gold) pair")


def precision_recall_f1(predictions: Sequence[str], gold: Sequence[str]) -> Tuple[float, float, float]:
    """
    Macro-averaged precision, recall and F1 over answer classes.

    The classes are the union of gold and predicted answers; a class never
    predicted has precision 0.
    """
    _check_pairs(predictions, gold)
    y_pred = [normalize_answer(p) for p in predictions]
    y_true = [normalize_answer(g) for g in gold]
    labels = sorted(set(y_true) | set(y_pred))
    precision, recall, f1, _ = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, average="macro", zero_division=0
    )
    return float(precision), float(recall), float(f1)


def strict_accuracy(predictions: Sequence[str], gold: Sequence[str]) -> float:
    _check_pairs(predictions, gold)
    hits = sum(normalize_answer(p) == normalize_answer(g) for p, g in zip(predictions, gold))
    return hits / len(gold)


def sentence_bleu_unsmoothed(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """
    BLEU of one tokenized pair with equal weights for orders 1-4 and no smoothing.

    Zero as soon as one order has no matching n-gram, which includes every
    candidate shorter than four tokens.
    """
    if not candidate:
        return 0.0
    log_precision = 0.0
    for n, weight in zip(range(1, 5), BLEU_WEIGHTS):
        candidate_grams = Counter(ngrams(candidate, n))
        reference_grams = Counter(ngrams(reference, n))
        total = sum(candidate_grams.values())
        matches = sum(min(count, reference_grams[gram]) for gram, count in candidate_grams.items())
        if total == 0 or matches == 0:
            return 0.0
        log_precision += weight * math.log(matches / total)
    c, r = len(candidate), len(reference)
    brevity = 1.0 if c > r else math.exp(1 - r / c)
    return brevity * math.exp(log_precision)


def bleu(candidates: Sequence[str], references: Sequence[str], variant: str = "sentence") -> float:
    """
    Corpus BLEU score of answer strings.

    sentence           arithmetic mean of unsmoothed sentence BLEU
    sentence_smoothed  arithmetic mean of NLTK sentence BLEU with smoothing method 1
    corpus             NLTK corpus BLEU
    """
    _check_pairs(candidates, references)
    if variant not in BLEU_VARIANTS:
        raise MetricError(f"Unknown BLEU variant '{variant}', expected one of {', '.join(BLEU_VARIANTS)}")
    hyps = [preprocess_question(c) for c in candidates]
    refs = [preprocess_question(r) for r in references]
    if variant == "sentence":
        return sum(sentence_bleu_unsmoothed(h, r) for h, r in zip(hyps, refs)) / len(hyps)
    if variant == "sentence_smoothed":
        smoothing = SmoothingFunction().method1
        scores = [
            sentence_bleu([r], h, weights=BLEU_WEIGHTS, smoothing_function=smoothing) if h else 0.0
            for h, r in zip(hyps, refs)
        ]
        return sum(scores) / len(scores)
    try:
        return float(corpus_bleu([[r] for r in refs], hyps, weights=BLEU_WEIGHTS))
    except ZeroDivisionError:
        return 0.0


@dataclass(frozen=True)
class CategoryScores:
    samples: int
    precision: float
    recall: float
    f1: float
    strict_accuracy: float
    bleu: float


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    strict_accuracy: float
    bleu: float
    samples: int
    per_category: Dict[CategoryLabel, CategoryScores] = field(default_factory=dict)


def _scores(predictions: Sequence[str], gold: Sequence[str], bleu_variant: str) -> CategoryScores:
    p, r, f = precision_recall_f1(predictions, gold)
    return CategoryScores(
        samples=len(gold),
        precision=p,
        recall=r,
        f1=f,
        strict_accuracy=strict_accuracy(predictions, gold),
        bleu=bleu(predictions, gold, bleu_variant),
    )


def compute_report(
    predictions: Sequence[str],
    gold: Sequence[str],
    categories: Optional[Sequence[CategoryLabel]] = None,
    bleu_variant: str = "sentence",
) -> MetricsReport:
    """Overall scores plus a breakdown by the gold derived category when given."""
    overall = _scores(predictions, gold, bleu_variant)
    per_category: Dict[CategoryLabel, CategoryScores] = {}
    if categories is not None:
        if len(categories) != len(gold):
            raise MetricError(f"{len(categories)} category labels for {len(gold)} gold answers")
        for category in CATEGORY_ORDER:
            rows: List[int] = [i for i, c in enumerate(categories) if c is category]
            if rows:
                per_category[category] = _scores(
                    [predictions[i] for i in rows], [gold[i] for i in rows], bleu_variant
                )
    return MetricsReport(
        precision=overall.precision,
        recall=overall.recall,
        f1=overall.f1,
        strict_accuracy=overall.strict_accuracy,
        bleu=overall.bleu,
        samples=overall.samples,
        per_category=per_category,
    )
