"""
Domain types shared by every stage of the pipeline.
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple


class CategoryLabel(str, Enum):
    """Question categories in their fixed order C1, C2, C3, C4, Binary."""

    MODALITY = "C1"
    PLANE = "C2"
    ORGAN = "C3"
    ABNORMALITY = "C4"
    BINARY = "Binary"

    @property
    def index(self) -> int:
        return CATEGORY_ORDER.index(self)

    @classmethod
    def from_index(cls, index: int) -> "CategoryLabel":
        return CATEGORY_ORDER[index]

    @classmethod
    def parse(cls, value: str) -> "CategoryLabel":
        """Accept 'C1'..'C4', 'Binary' (any case) or a member name."""
        for member in cls:
            if value == member.value or value.lower() == member.value.lower() or value.upper() == member.name:
                return member
        raise ValueError(f"Unknown category: {value}")


CATEGORY_ORDER: Tuple[CategoryLabel, ...] = tuple(CategoryLabel)
ORIGINAL_CATEGORIES: Tuple[CategoryLabel, ...] = CATEGORY_ORDER[:4]
SUPPORT_CATEGORIES: Tuple[CategoryLabel, ...] = CATEGORY_ORDER[:3]
NUM_CATEGORIES = len(CATEGORY_ORDER)


@dataclass(frozen=True)
class Sample:
    image_id: str
    image_path: Path
    original_category: CategoryLabel
    derived_category: CategoryLabel
    question: str
    tokens: Tuple[str, ...]
    answer: Optional[str]
    image_width: int
    image_height: int
    # False for unanswered (test) samples: the categorizer decides Binary routing
    category_known: bool = True


@dataclass(frozen=True)
class Provenance:
    source_files: Tuple[str, ...]
    seed: Optional[int] = None  # None means "original" (not resampled)
    ratio: Optional[Tuple[int, int]] = None
    stratified: bool = False

    def describe(self) -> Dict[str, object]:
        return {
            "source_files": list(self.source_files),
            "seed": "original" if self.seed is None else self.seed,
            "ratio": None if self.ratio is None else f"{self.ratio[0]}:{self.ratio[1]}",
            "stratified": self.stratified,
        }


@dataclass(frozen=True)
class DatasetSplit:
    samples: Tuple[Sample, ...]
    provenance: Provenance = field(default_factory=lambda: Provenance(source_files=()))

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def __getitem__(self, index: int) -> Sample:
        return self.samples[index]

    @property
    def has_answers(self) -> bool:
        return all(s.answer is not None for s in self.samples)

    def filter(self, categories: Iterable[CategoryLabel]) -> "DatasetSplit":
        """Keep samples whose derived category is in `categories`, order preserved."""
        wanted = set(categories)
        return DatasetSplit(
            samples=tuple(s for s in self.samples if s.derived_category in wanted),
            provenance=self.provenance,
        )

    def by_category(self, derived: bool = True) -> Dict[CategoryLabel, List[Sample]]:
        groups: Dict[CategoryLabel, List[Sample]] = {c: [] for c in CATEGORY_ORDER}
        for sample in self.samples:
            groups[sample.derived_category if derived else sample.original_category].append(sample)
        return groups
