# __init__.py

from .types import (
    CATEGORY_ORDER,
    NUM_CATEGORIES,
    ORIGINAL_CATEGORIES,
    SUPPORT_CATEGORIES,
    CategoryLabel,
    DatasetSplit,
    Provenance,
    Sample,
)
from .text import Vocabulary, build_vocabulary, normalize_answer, preprocess_question
from .dictionaries import (
    AnswerDictionary,
    answer_category,
    build_answer_dictionaries,
    build_global_dictionary,
)
from .dataset import derive_category, load_dataset, load_split, resolve_split, split_layout

__all__ = [
    "CATEGORY_ORDER",
    "NUM_CATEGORIES",
    "ORIGINAL_CATEGORIES",
    "SUPPORT_CATEGORIES",
    "CategoryLabel",
    "DatasetSplit",
    "Provenance",
    "Sample",
    "Vocabulary",
    "build_vocabulary",
    "normalize_answer",
    "preprocess_question",
    "AnswerDictionary",
    "answer_category",
    "build_answer_dictionaries",
    "build_global_dictionary",
    "derive_category",
    "load_dataset",
    "load_split",
    "resolve_split",
    "split_layout",
]
