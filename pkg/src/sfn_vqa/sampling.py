"""
Inverse-frequency weighted sampling over answer classes.

A sample's weight is 1 / (number of training samples sharing its answer class
within its derived category), so every class of a category is drawn with equal
probability. Draws are with replacement.
"""

from collections import Counter
from dataclasses import dataclass
from typing import List, Mapping

import numpy as np
import torch
from torch.utils.data import WeightedRandomSampler

from sfn_vqa.core.exceptions import SamplingError
from sfn_vqa.data.dictionaries import AnswerDictionary
from sfn_vqa.data.types import CategoryLabel, DatasetSplit


@dataclass(frozen=True)
class SampleWeights:
    weights: np.ndarray  # float64, aligned with the split

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.ndim != 1 or weights.size == 0:
            raise SamplingError("Sample weights must be a non-empty vector")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            bad = int(np.flatnonzero(~np.isfinite(weights) | (weights <= 0))[0])
            raise SamplingError(f"Sample weight at position {bad} is {weights[bad]}; weights must be positive and finite")
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return self.weights.size

    def as_tensor(self) -> torch.Tensor:
        return torch.from_numpy(self.weights)


def compute_weights(
    split: DatasetSplit,
    dictionaries: Mapping[CategoryLabel, AnswerDictionary],
    balance_categories: bool = False,
) -> SampleWeights:
    """
    Inverse class-frequency weights within each derived category.

    With `balance_categories` the weights are additionally rescaled so that every
    derived category present in the split carries the same total mass.

    Raises:
        SamplingError: for an empty split or an answer missing from its category dictionary
    """
    if len(split) == 0:
        raise SamplingError("Cannot compute sample weights for an empty split")
    keys = []
    for position, sample in enumerate(split):
        dictionary = dictionaries.get(sample.derived_category)
        if sample.answer is None or dictionary is None or sample.answer not in dictionary:
            raise SamplingError(
                f"Sample {position} (image {sample.image_id}, question '{sample.question}') has answer "
                f"{sample.answer!r}, unknown to the {sample.derived_category.value} dictionary"
            )
        keys.append((sample.derived_category, dictionary.encode(sample.answer)))

    class_counts = Counter(keys)
    weights = np.array([1.0 / class_counts[key] for key in keys], dtype=np.float64)
    if balance_categories:
        totals = Counter()
        for (category, _), weight in zip(keys, weights):
            totals[category] += weight
        weights = np.array([w / totals[c] for (c, _), w in zip(keys, weights)], dtype=np.float64)
    return SampleWeights(weights)


def make_generator(seed: int) -> torch.Generator:
    generator = torch.Generator()
    generator.manual_seed(seed)
    return generator


def sample_indices(weights: SampleWeights, batch_size: int, generator: torch.Generator) -> List[int]:
    """Draw batch_size indices i.i.d. with replacement, P(i) proportional to weights[i]."""
    if batch_size < 1:
        raise SamplingError(f"batch_size must be >= 1, got {batch_size}")
    drawn = torch.multinomial(weights.as_tensor(), batch_size, replacement=True, generator=generator)
    return drawn.tolist()


def make_sampler(weights: SampleWeights, num_samples: int, generator: torch.Generator) -> WeightedRandomSampler:
    """Epoch sampler for a DataLoader: num_samples weighted draws with replacement."""
    if num_samples < 1:
        raise SamplingError(f"num_samples must be >= 1, got {num_samples}")
    return WeightedRandomSampler(weights.as_tensor(), num_samples=num_samples, replacement=True, generator=generator)
