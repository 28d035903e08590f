"""Inverse-frequency weights and weighted draws."""

from collections import Counter

import numpy as np
import pytest

from sfn_vqa.core.exceptions import SamplingError
from sfn_vqa.data import build_answer_dictionaries
from sfn_vqa.data.types import CategoryLabel, DatasetSplit
from sfn_vqa.sampling import SampleWeights, compute_weights, make_generator, make_sampler, sample_indices
from tests.conftest import make_sample

ZIPF_SIZES = [200, 100, 67, 50, 40, 33, 29, 25, 22, 20]


def zipf_split():
    samples = [
        make_sample("what organ system is shown?", f"organ {k}", original=CategoryLabel.ORGAN)
        for k, size in enumerate(ZIPF_SIZES)
        for _ in range(size)
    ]
    return DatasetSplit(tuple(samples))


def test_weights_are_inverse_class_frequencies():
    split = DatasetSplit(
        (
            make_sample("q", "ct"),
            make_sample("q", "ct"),
            make_sample("q", "mri"),
            make_sample("q", "axial", original=CategoryLabel.PLANE),
        )
    )
    weights = compute_weights(split, build_answer_dictionaries(split))
    assert weights.weights.tolist() == [0.5, 0.5, 1.0, 1.0]


def test_every_class_has_equal_probability_by_enumeration():
    split = zipf_split()
    weights = compute_weights(split, build_answer_dictionaries(split)).weights
    mass = Counter()
    for sample, weight in zip(split, weights):
        mass[sample.answer] += weight
    total = weights.sum()
    for answer in mass:
        assert mass[answer] / total == pytest.approx(0.1, abs=1e-12)


def test_weighted_draws_are_close_to_uniform_over_classes():
    split = zipf_split()
    weights = compute_weights(split, build_answer_dictionaries(split))
    drawn = sample_indices(weights, 100_000, make_generator(0))
    counts = Counter(split[i].answer for i in drawn)
    frequencies = np.array([counts[f"organ {k}"] / 100_000 for k in range(len(ZIPF_SIZES))])
    total_variation = 0.5 * np.abs(frequencies - 0.1).sum()
    assert total_variation < 0.01


def test_two_class_draws():
    split = DatasetSplit(tuple([make_sample("q", "ct")] * 3 + [make_sample("q", "mri")]))
    weights = compute_weights(split, build_answer_dictionaries(split))
    drawn = sample_indices(weights, 100_000, make_generator(1))
    share = sum(1 for i in drawn if split[i].answer == "ct") / 100_000
    assert abs(share - 0.5) < 0.01


def test_draws_are_reproducible():
    split = zipf_split()
    weights = compute_weights(split, build_answer_dictionaries(split))
    assert sample_indices(weights, 64, make_generator(5)) == sample_indices(weights, 64, make_generator(5))
    sampler = make_sampler(weights, 32, make_generator(5))
    assert len(sampler) == 32
    assert list(sampler) == list(make_sampler(weights, 32, make_generator(5)))


def test_balance_categories_equalizes_category_mass():
    split = DatasetSplit(
        (
            make_sample("q", "ct"),
            make_sample("q", "mri"),
            make_sample("q", "pet"),
            make_sample("q", "axial", original=CategoryLabel.PLANE),
        )
    )
    weights = compute_weights(split, build_answer_dictionaries(split), balance_categories=True).weights
    assert weights[:3].sum() == pytest.approx(1.0)
    assert weights[3] == pytest.approx(1.0)


def test_compute_weights_errors():
    split = DatasetSplit((make_sample("q", "ct"),))
    dictionaries = build_answer_dictionaries(split)
    with pytest.raises(SamplingError):
        compute_weights(DatasetSplit(()), dictionaries)
    with pytest.raises(SamplingError, match="mri"):
        compute_weights(DatasetSplit((make_sample("q", "mri"),)), dictionaries)


def test_invalid_weights_and_sizes():
    with pytest.raises(SamplingError, match="position 1"):
        SampleWeights(np.array([1.0, 0.0]))
    with pytest.raises(SamplingError):
        SampleWeights(np.array([1.0, np.nan]))
    with pytest.raises(SamplingError):
        SampleWeights(np.array([]))
    weights = SampleWeights(np.array([1.0, 2.0]))
    with pytest.raises(SamplingError):
        sample_indices(weights, 0, make_generator(0))
    with pytest.raises(SamplingError):
        make_sampler(weights, 0, make_generator(0))
