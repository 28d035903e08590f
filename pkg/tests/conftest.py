"""Shared fixtures: a tiny synthetic dataset and a small model configuration."""

from pathlib import Path

import pytest
import torch

from sfn_vqa.config import get_config
from sfn_vqa.config.config import SyntheticSpec
from sfn_vqa.data import load_split
from sfn_vqa.data.batching import Batch
from sfn_vqa.data.synthetic import generate_synthetic
from sfn_vqa.data.text import PAD_INDEX, normalize_answer, preprocess_question
from sfn_vqa.data.types import CategoryLabel, Sample

TINY_SPEC = SyntheticSpec(n_images=48, valid_fraction=0.125, test_images=4, seed=11)

SMALL_MODEL = [
    "data.image_size=64",
    "model.embedding_dim=8",
    "model.question_dim=12",
    "model.size_dim=4",
    "model.glimpses=2",
    "model.support_dim=6",
    "model.classifier_dim=16",
    "model.categorizer_dim=8",
    "training.batch_size=16",
    "training.epochs=1",
]


def small_config(*overrides: str):
    return get_config(overrides=[*SMALL_MODEL, *overrides], use_environment=False)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("synthetic")
    generate_synthetic(TINY_SPEC, root)
    return root


@pytest.fixture(scope="session")
def config():
    return small_config()


@pytest.fixture(scope="session")
def splits(tiny_dataset, config):
    return {name: load_split(tiny_dataset, config, name) for name in ("train", "valid", "test")}


def write_question_file(path: Path, lines) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
    return path


def write_image(path: Path, size=(40, 30)) -> Path:
    from PIL import Image

    path.parent.mkdir(parents=True, exist_ok=True)
    Image.new("RGB", size, color=(120, 60, 30)).save(path)
    return path


def make_sample(question, answer, original=CategoryLabel.MODALITY, derived=None, image_id="img", size=(10, 10)):
    """An in-memory Sample; the derived category follows the yes/no rule unless given."""
    if derived is None:
        binary = answer is not None and normalize_answer(answer) in ("yes", "no")
        derived = CategoryLabel.BINARY if binary else original
    return Sample(
        image_id=image_id,
        image_path=Path(f"{image_id}.png"),
        original_category=original,
        derived_category=derived,
        question=question,
        tokens=tuple(preprocess_question(question)),
        answer=answer,
        image_width=size[0],
        image_height=size[1],
        category_known=answer is not None,
    )


def random_batch(n, vocab_size, image_size=64, max_length=6, seed=0) -> Batch:
    """A Batch of random images, padded questions and sizes; every target is class 0."""
    generator = torch.Generator().manual_seed(seed)
    lengths = torch.randint(1, max_length + 1, (n,), generator=generator)
    tokens = torch.randint(2, vocab_size, (n, max_length), generator=generator)
    tokens[torch.arange(max_length)[None, :] >= lengths[:, None]] = PAD_INDEX
    return Batch(
        images=torch.randn(n, 3, image_size, image_size, generator=generator),
        tokens=tokens,
        lengths=lengths,
        sizes=torch.randint(16, 1025, (n, 2), generator=generator).float(),
        categories=torch.randint(0, 5, (n,), generator=generator),
        targets=torch.zeros(n, dtype=torch.long),
        global_targets=torch.zeros(n, dtype=torch.long),
        indices=torch.arange(n),
    )
