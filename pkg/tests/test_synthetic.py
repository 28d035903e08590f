"""The seeded synthetic dataset generator."""

from collections import Counter

import numpy as np
import pytest

from sfn_vqa.config.config import SyntheticSpec
from sfn_vqa.config.loader import load_synthetic_labels
from sfn_vqa.core.exceptions import ConfigError
from sfn_vqa.data import load_dataset
from sfn_vqa.data.synthetic import (
    NO_FINDING,
    SEED_BLOCK,
    ask_questions,
    draw_image_labels,
    generate_synthetic,
    load_inventory,
    zipf_probabilities,
)
from sfn_vqa.data.text import normalize_answer
from sfn_vqa.data.types import CategoryLabel

SMALL = SyntheticSpec(n_images=30, valid_fraction=0.0, test_images=2, seed=5)


def read_tree(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def labels(attribute):
    return {label for label, _ in load_synthetic_labels()[attribute]}


def test_generation_is_byte_identical_for_equal_specs(tmp_path):
    generate_synthetic(SMALL, tmp_path / "a")
    generate_synthetic(SMALL, tmp_path / "b")
    assert read_tree(tmp_path / "a") == read_tree(tmp_path / "b")


def test_other_seeds_give_other_data(tmp_path):
    generate_synthetic(SMALL, tmp_path / "a")
    generate_synthetic(SMALL.model_copy(update={"seed": 6}), tmp_path / "b")
    assert read_tree(tmp_path / "a") != read_tree(tmp_path / "b")


def test_layout_and_counts(tmp_path):
    counts = generate_synthetic(SMALL, tmp_path)
    assert counts["train"]["images"] == 30
    assert counts["valid"]["images"] == 0
    assert counts["test"]["images"] == 2
    for split in ("train", "valid", "test"):
        for category in ("C1", "C2", "C3", "C4"):
            assert (tmp_path / split / f"{category}_{split}.txt").exists()
    assert len(list((tmp_path / "train" / "images").glob("*.png"))) == 30
    for line in (tmp_path / "test" / "C2_test.txt").read_text(encoding="utf-8").splitlines():
        assert line.count("|") == 1


def test_answers_come_from_the_label_inventory(splits):
    modalities = labels("modality")
    for sample in splits["train"]:
        answer = normalize_answer(sample.answer)
        if sample.derived_category is CategoryLabel.BINARY:
            assert answer in ("yes", "no")
        elif sample.derived_category is CategoryLabel.MODALITY:
            assert answer in modalities
        elif sample.derived_category is CategoryLabel.PLANE:
            assert answer in {"axial", "sagittal", "coronal"}
        elif sample.derived_category is CategoryLabel.ORGAN:
            assert answer in labels("organ")
        else:
            assert answer in labels("abnormality") | {"none"}


def test_every_training_answer_occurs_at_least_twice(splits):
    counts = Counter((s.derived_category, normalize_answer(s.answer)) for s in splits["train"])
    assert min(counts.values()) >= 2
    abnormalities = {answer for (category, answer) in counts if category is CategoryLabel.ABNORMALITY}
    assert abnormalities == labels("abnormality") | {"none"}
    assert {answer for (category, answer) in counts if category is CategoryLabel.BINARY} == {"yes", "no"}


def test_canvas_size_follows_the_modality(splits):
    for sample in splits["train"]:
        if sample.original_category is CategoryLabel.MODALITY and normalize_answer(sample.answer) == "ct":
            assert (sample.image_width, sample.image_height) == (512, 512)


def test_rare_tail_adds_single_occurrence_classes(tmp_path):
    spec = SyntheticSpec(n_images=SEED_BLOCK + 3, valid_fraction=0.0, test_images=0, rare_tail=2, seed=1)
    generate_synthetic(spec, tmp_path)
    split = load_dataset(sorted((tmp_path / "train").glob("C?_train.txt")), tmp_path / "train" / "images")
    rare = Counter(s.answer for s in split if s.answer.startswith("rare finding"))
    assert rare == Counter({"rare finding 1": 1, "rare finding 2": 1})


def test_too_few_training_images(tmp_path):
    with pytest.raises(ConfigError):
        generate_synthetic(SyntheticSpec(n_images=SEED_BLOCK - 1, valid_fraction=0.0), tmp_path)


def test_zipf_probabilities():
    assert zipf_probabilities(4, 0.0).tolist() == [0.25, 0.25, 0.25, 0.25]
    p = zipf_probabilities(3, 1.0)
    assert p.sum() == pytest.approx(1.0)
    assert p[0] / p[2] == pytest.approx(3.0)


# chi-square critical values at p = 0.001 by degrees of freedom
CHI2_CRITICAL = {2: 13.816, 3: 16.266, 4: 18.467}
DRAWS = 10_000


def label_histograms(imbalance, seed=0):
    inventory = load_inventory()
    spec = SyntheticSpec(imbalance=imbalance, seed=seed)
    rng = np.random.Generator(np.random.PCG64(seed))
    histograms = {
        "modality": np.zeros(len(inventory.modalities)),
        "plane": np.zeros(len(inventory.planes)),
        "organ": np.zeros(len(inventory.organs)),
    }
    for _ in range(DRAWS):
        drawn = draw_image_labels(rng, inventory, spec)
        histograms["modality"][drawn.modality] += 1
        histograms["plane"][drawn.plane] += 1
        histograms["organ"][drawn.organ] += 1
    return histograms


def chi_square_against_uniform(observed):
    expected = observed.sum() / len(observed)
    return float(((observed - expected) ** 2 / expected).sum())


def test_zero_imbalance_gives_uniform_answer_histograms():
    for attribute, observed in label_histograms(0.0).items():
        assert observed.sum() == DRAWS
        assert chi_square_against_uniform(observed) < CHI2_CRITICAL[len(observed) - 1], attribute


def test_positive_imbalance_skews_answer_histograms():
    histograms = label_histograms(1.0)
    for attribute, observed in histograms.items():
        assert chi_square_against_uniform(observed) > CHI2_CRITICAL[len(observed) - 1], attribute
        assert list(observed) == sorted(observed, reverse=True), attribute
    modality = histograms["modality"]
    # p_0 / p_4 = 5 under exponent 1
    assert 4.0 < modality[0] / modality[-1] < 6.2


def test_normal_images_answer_none_to_open_abnormality_questions():
    inventory = load_inventory()
    spec = SyntheticSpec(seed=3)
    rng = np.random.Generator(np.random.PCG64(3))
    normal = draw_image_labels(rng, inventory, spec, force_abnormal=False)
    (record,) = ask_questions(rng, normal, inventory, spec, [CategoryLabel.ABNORMALITY], c4_kind="open")
    assert record.answer == NO_FINDING
    (record,) = ask_questions(rng, normal, inventory, spec, [CategoryLabel.ABNORMALITY], c4_kind="binary")
    assert record.answer == "no"
