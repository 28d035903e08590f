"""
Tensor views of a DatasetSplit for the training loop.

Each item carries the resized, normalized image, the encoded question, the
original image size and the targets of every label space a model may train
against. Missing targets are -1 (ignored by the losses).
"""

from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence

import torch
from PIL import Image
from torch.utils.data import Dataset
from torchvision import transforms

from sfn_vqa.config.config import DataConfig
from sfn_vqa.core.exceptions import DatasetError
from sfn_vqa.data.dictionaries import AnswerDictionary
from sfn_vqa.data.text import PAD_INDEX, Vocabulary
from sfn_vqa.data.types import CategoryLabel, DatasetSplit

IGNORE_INDEX = -1


@dataclass
class Batch:
    images: torch.Tensor  # (B, 3, S, S)
    tokens: torch.Tensor  # (B, L) long, padded with PAD_INDEX
    lengths: torch.Tensor  # (B,) long, >= 1
    sizes: torch.Tensor  # (B, 2) original (width, height) in pixels
    categories: torch.Tensor  # (B,) derived category index, -1 when unknown
    targets: torch.Tensor  # (B,) class index in the derived category's dictionary
    global_targets: torch.Tensor  # (B,) class index in the global dictionary
    indices: torch.Tensor  # (B,) positions in the source split

    def __len__(self) -> int:
        return self.tokens.shape[0]


def image_transform(data_config: DataConfig) -> transforms.Compose:
    return transforms.Compose(
        [
            transforms.Resize((data_config.image_size, data_config.image_size)),
            transforms.ToTensor(),
            transforms.Normalize(mean=list(data_config.image_mean), std=list(data_config.image_std)),
        ]
    )


def encode_tokens(tokens: Sequence[str], vocab: Vocabulary) -> List[int]:
    """Vocabulary indices of a token sequence; an empty question becomes a single pad token."""
    return vocab.encode(tokens) or [PAD_INDEX]


class QuestionImageDataset(Dataset):
    """Map-style dataset over a split; decoded images are optionally kept in memory."""

    def __init__(
        self,
        split: DatasetSplit,
        vocab: Vocabulary,
        data_config: DataConfig,
        dictionaries: Optional[Mapping[CategoryLabel, AnswerDictionary]] = None,
        global_dictionary: Optional[AnswerDictionary] = None,
        load_images: bool = True,
    ):
        self.split = split
        self.vocab = vocab
        self.dictionaries = dictionaries or {}
        self.global_dictionary = global_dictionary
        self.transform = image_transform(data_config)
        self.cache_images = data_config.cache_images
        # question-only models (the categorizer) never decode images
        self.load_images = load_images
        self._image_cache: Dict[str, torch.Tensor] = {}

    def __len__(self) -> int:
        return len(self.split)

    def _load_image(self, image_id: str, path) -> torch.Tensor:
        if image_id in self._image_cache:
            return self._image_cache[image_id]
        try:
            with Image.open(path) as img:
                tensor = self.transform(img.convert("RGB"))
        except OSError as e:
            raise DatasetError(f"Cannot decode image '{image_id}' at {path}: {e}") from e
        if self.cache_images:
            self._image_cache[image_id] = tensor
        return tensor

    def __getitem__(self, index: int) -> Dict[str, object]:
        sample = self.split[index]
        if sample.category_known:
            category = sample.derived_category.index
            dictionary = self.dictionaries.get(sample.derived_category)
            target = dictionary.encode_or(sample.answer) if dictionary is not None else IGNORE_INDEX
        else:
            category, target = IGNORE_INDEX, IGNORE_INDEX
        global_target = (
            self.global_dictionary.encode_or(sample.answer) if self.global_dictionary is not None else IGNORE_INDEX
        )
        return {
            "image": self._load_image(sample.image_id, sample.image_path) if self.load_images else torch.zeros(0),
            "tokens": encode_tokens(sample.tokens, self.vocab),
            "size": (float(sample.image_width), float(sample.image_height)),
            "category": category,
            "target": target,
            "global_target": global_target,
            "index": index,
        }


def collate_batch(items: Sequence[Dict[str, object]]) -> Batch:
    longest = max(len(item["tokens"]) for item in items)
    tokens = torch.full((len(items), longest), PAD_INDEX, dtype=torch.long)
    for row, item in enumerate(items):
        tokens[row, : len(item["tokens"])] = torch.tensor(item["tokens"], dtype=torch.long)
    return Batch(
        images=torch.stack([item["image"] for item in items]),
        tokens=tokens,
        lengths=torch.tensor([len(item["tokens"]) for item in items], dtype=torch.long),
        sizes=torch.tensor([item["size"] for item in items], dtype=torch.float32),
        categories=torch.tensor([item["category"] for item in items], dtype=torch.long),
        targets=torch.tensor([item["target"] for item in items], dtype=torch.long),
        global_targets=torch.tensor([item["global_target"] for item in items], dtype=torch.long),
        indices=torch.tensor([item["index"] for item in items], dtype=torch.long),
    )
