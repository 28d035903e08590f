"""
Per-category answer dictionaries.

Answers are keyed by their trimmed, lowercased text only. Near-duplicates such as
"ct - gi & iv contrast" and "ct with gi and iv contrast" stay separate classes.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from sfn_vqa.core.exceptions import DatasetError
from sfn_vqa.data.text import BINARY_ANSWERS, normalize_answer
from sfn_vqa.data.types import CATEGORY_ORDER, CategoryLabel, DatasetSplit

GLOBAL_KEY = "global"


@dataclass(frozen=True)
class AnswerDictionary:
    """Class index <-> answer string. `category` is None for the global (IF-1C) dictionary."""

    category: Optional[CategoryLabel]
    answers: Tuple[str, ...]
    _index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {answer: i for i, answer in enumerate(self.answers)}
        if len(index) != len(self.answers):
            raise DatasetError(f"Duplicate answers in dictionary {self.name}")
        object.__setattr__(self, "_index", index)

    @property
    def name(self) -> str:
        return GLOBAL_KEY if self.category is None else self.category.value

    @property
    def answer_to_class(self) -> Dict[str, int]:
        return dict(self._index)

    def __len__(self) -> int:
        return len(self.answers)

    def __contains__(self, answer: str) -> bool:
        return normalize_answer(answer) in self._index

    def encode(self, answer: str) -> int:
        key = normalize_answer(answer)
        if key not in self._index:
            raise KeyError(f"Answer '{key}' not in {self.name} dictionary")
        return self._index[key]

    def encode_or(self, answer: Optional[str], default: int = -1) -> int:
        if answer is None:
            return default
        return self._index.get(normalize_answer(answer), default)

    def decode(self, class_index: int) -> str:
        return self.answers[class_index]


def _first_occurrence(answers: Sequence[str]) -> List[str]:
    seen: Dict[str, None] = {}
    for answer in answers:
        seen.setdefault(answer, None)
    return list(seen)


def build_answer_dictionaries(train: DatasetSplit) -> Dict[CategoryLabel, AnswerDictionary]:
    """
    Five dictionaries keyed by derived category, classes in first-occurrence order.

    The Binary dictionary always holds exactly "yes" and "no"; an answer missing
    from the training data is appended after the ones that occur.
    """
    per_category: Dict[CategoryLabel, List[str]] = {c: [] for c in CATEGORY_ORDER}
    for sample in train:
        if sample.answer is None:
            raise DatasetError(f"Training sample {sample.image_id} has no answer")
        per_category[sample.derived_category].append(normalize_answer(sample.answer))

    dictionaries = {}
    for category in CATEGORY_ORDER:
        answers = _first_occurrence(per_category[category])
        if category is CategoryLabel.BINARY:
            answers += [a for a in BINARY_ANSWERS if a not in answers]
        dictionaries[category] = AnswerDictionary(category, tuple(answers))
    return dictionaries


def build_global_dictionary(train: DatasetSplit) -> AnswerDictionary:
    """Union of all training answers in first-occurrence order (the IF-1C label space)."""
    answers = []
    for sample in train:
        if sample.answer is None:
            raise DatasetError(f"Training sample {sample.image_id} has no answer")
        answers.append(normalize_answer(sample.answer))
    return AnswerDictionary(None, tuple(_first_occurrence(answers)))


def answer_category(
    answer: str,
    dictionaries: Mapping[CategoryLabel, AnswerDictionary],
    default: Optional[CategoryLabel] = None,
) -> CategoryLabel:
    """First category (in the fixed order) whose dictionary contains `answer`, else `default`."""
    for category in CATEGORY_ORDER:
        if answer in dictionaries[category]:
            return category
    if default is not None:
        return default
    raise KeyError(f"Answer '{answer}' is in no category dictionary")


def dictionaries_to_json(
    dictionaries: Mapping[CategoryLabel, AnswerDictionary],
    global_dictionary: Optional[AnswerDictionary] = None,
) -> Dict[str, List[str]]:
    payload = {category.value: list(dictionaries[category].answers) for category in CATEGORY_ORDER}
    if global_dictionary is not None:
        payload[GLOBAL_KEY] = list(global_dictionary.answers)
    return payload


def dictionaries_from_json(
    payload: Mapping[str, Sequence[str]],
) -> Tuple[Dict[CategoryLabel, AnswerDictionary], Optional[AnswerDictionary]]:
    try:
        dictionaries = {
            category: AnswerDictionary(category, tuple(payload[category.value]))
            for category in CATEGORY_ORDER
        }
    except KeyError as e:
        raise DatasetError(f"Answer dictionaries are missing category {e}") from e
    global_answers = payload.get(GLOBAL_KEY)
    global_dictionary = None if global_answers is None else AnswerDictionary(None, tuple(global_answers))
    return dictionaries, global_dictionary
