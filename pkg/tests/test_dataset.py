"""Question file parsing, category derivation, split resolution and batching."""

import pytest
import torch

from sfn_vqa.core.exceptions import DatasetError
from sfn_vqa.data import build_answer_dictionaries, build_global_dictionary, build_vocabulary
from sfn_vqa.data.batching import IGNORE_INDEX, QuestionImageDataset, collate_batch, encode_tokens
from sfn_vqa.data.dataset import category_from_file_name, derive_category, load_dataset, resolve_split
from sfn_vqa.data.text import PAD_INDEX, Vocabulary
from sfn_vqa.data.types import CategoryLabel
from tests.conftest import write_image, write_question_file


def test_derive_category_binary_answers():
    assert derive_category(CategoryLabel.MODALITY, "Yes") is CategoryLabel.BINARY
    assert derive_category(CategoryLabel.ABNORMALITY, " no ") is CategoryLabel.BINARY
    assert derive_category(CategoryLabel.ORGAN, "yes, left lung") is CategoryLabel.ORGAN


def test_derive_category_rejects_empty_answer():
    with pytest.raises(DatasetError):
        derive_category(CategoryLabel.PLANE, "   ")


def test_category_from_file_name():
    assert category_from_file_name("C2_train.txt") is CategoryLabel.PLANE
    assert category_from_file_name("/x/C4.txt") is CategoryLabel.ABNORMALITY
    with pytest.raises(DatasetError):
        category_from_file_name("C12_train.txt")


def test_load_dataset_parses_lines(tmp_path):
    write_image(tmp_path / "images" / "a1.jpg", size=(40, 30))
    write_image(tmp_path / "images" / "a2.png", size=(50, 20))
    questions = write_question_file(
        tmp_path / "C1_train.txt",
        ["a1|what modality is shown?|CT", "", "a2|is this an mri?|no", "a1|what is it?|ct|with a pipe"],
    )
    split = load_dataset([questions], tmp_path / "images")
    assert len(split) == 3
    first, second, third = split
    assert first.derived_category is CategoryLabel.MODALITY
    assert first.tokens == ("what", "modality", "is", "shown")
    assert (first.image_width, first.image_height) == (40, 30)
    assert second.derived_category is CategoryLabel.BINARY
    assert second.original_category is CategoryLabel.MODALITY
    assert (second.image_width, second.image_height) == (50, 20)
    assert third.answer == "ct|with a pipe"


def test_load_dataset_test_file_without_answers(tmp_path):
    write_image(tmp_path / "images" / "t1.png")
    questions = write_question_file(tmp_path / "C4_test.txt", ["t1|is this image abnormal?"])
    split = load_dataset([questions], tmp_path / "images")
    assert split[0].answer is None
    assert split[0].category_known is False
    assert split[0].derived_category is CategoryLabel.ABNORMALITY
    assert not split.has_answers


def test_load_dataset_missing_image_names_the_id(tmp_path):
    (tmp_path / "images").mkdir()
    questions = write_question_file(tmp_path / "C2_train.txt", ["ghost|what plane?|axial"])
    with pytest.raises(DatasetError, match="ghost"):
        load_dataset([questions], tmp_path / "images")


def test_load_dataset_malformed_line_names_file_and_line(tmp_path):
    write_image(tmp_path / "images" / "a1.png")
    questions = write_question_file(tmp_path / "C3_train.txt", ["a1|what organ?|lung", "no pipes here"])
    with pytest.raises(DatasetError, match="C3_train.txt:2"):
        load_dataset([questions], tmp_path / "images")


def test_load_dataset_keeps_file_order_with_threads(tmp_path):
    write_image(tmp_path / "images" / "a1.png")
    files = [
        write_question_file(tmp_path / f"C{k}_train.txt", [f"a1|question {k}|answer {k}"]) for k in (1, 2, 3, 4)
    ]
    split = load_dataset(files, tmp_path / "images", threads=4)
    assert [s.answer for s in split] == ["answer 1", "answer 2", "answer 3", "answer 4"]


def test_resolve_split_synthetic_layout(tiny_dataset, config):
    files, image_dirs = resolve_split(tiny_dataset, config, "train")
    assert [f.name for f in files] == ["C1_train.txt", "C2_train.txt", "C3_train.txt", "C4_train.txt"]
    assert image_dirs == [tiny_dataset / "train" / "images"]


def test_resolve_split_unknown(tiny_dataset, config):
    with pytest.raises(DatasetError):
        resolve_split(tiny_dataset, config, "holdout")


def test_encode_tokens_empty_question_is_one_pad():
    assert encode_tokens([], Vocabulary(["a"])) == [PAD_INDEX]


def test_question_image_dataset_batches(splits, config):
    train = splits["train"]
    vocab = build_vocabulary(train)
    dictionaries = build_answer_dictionaries(train)
    dataset = QuestionImageDataset(train, vocab, config.data, dictionaries, build_global_dictionary(train))
    batch = collate_batch([dataset[i] for i in range(5)])
    assert len(batch) == 5
    assert batch.images.shape == (5, 3, 64, 64)
    assert batch.tokens.shape[0] == 5
    assert int(batch.lengths.max()) == batch.tokens.shape[1]
    assert batch.indices.tolist() == [0, 1, 2, 3, 4]
    for row in range(5):
        sample = train[row]
        assert batch.categories[row] == sample.derived_category.index
        assert dictionaries[sample.derived_category].decode(int(batch.targets[row])) == sample.answer.strip().lower()


def test_unanswered_samples_are_ignored_by_losses(splits, config):
    test = splits["test"]
    dataset = QuestionImageDataset(test, build_vocabulary(splits["train"]), config.data)
    item = dataset[0]
    assert item["category"] == IGNORE_INDEX
    assert item["target"] == IGNORE_INDEX
    assert item["global_target"] == IGNORE_INDEX


def test_dataset_without_images(splits, config):
    dataset = QuestionImageDataset(splits["train"], build_vocabulary(splits["train"]), config.data, load_images=False)
    batch = collate_batch([dataset[0], dataset[1]])
    assert batch.images.shape == (2, 0)
    assert batch.sizes.dtype == torch.float32
