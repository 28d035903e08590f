"""
Input encoders: question (word embedding + LSTM), image (conv backbone) and
original image size (one FC layer).
"""

from collections import OrderedDict
from pathlib import Path
from typing import Optional

import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence
from torchvision.models import vgg16

from sfn_vqa.core.exceptions import ModelError
from sfn_vqa.core.logging import get_logger
from sfn_vqa.data.text import PAD_INDEX, Vocabulary
from sfn_vqa.training.checkpoint import load_arrays_into, read_named_arrays

logger = get_logger(__name__)

EMBEDDING_INIT_RANGE = 0.05
SMALL_CHANNELS = (16, 32, 64, 64)
SMALL_POOLS = (4, 2, 2, 2)
VGG_CHANNELS = 512
BACKBONE_STRIDE = 32


def load_embeddings(path, vocab: Vocabulary, seed: int = 0, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """
    Build a |V| x D embedding table from a whitespace-separated text file (GloVe format).

    Rows of tokens found in the file are copied; other rows are drawn from
    uniform(-0.05, 0.05) with a generator seeded by `seed`; the pad row is zero.

    Raises:
        ModelError: when the file is missing, empty or has inconsistent vector widths
    """
    path = Path(path)
    if not path.exists():
        raise ModelError(f"Embedding file not found: {path}")
    vectors = {}
    width: Optional[int] = None
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if width is None:
                width = len(values)
            if len(values) != width or width == 0:
                raise ModelError(f"{path}:{number}: vector width {len(values)} differs from {width}")
            if token in vocab and token not in vectors:
                try:
                    vectors[token] = [float(v) for v in values]
                except ValueError as e:
                    raise ModelError(f"{path}:{number}: non-numeric vector entry") from e
    if width is None:
        raise ModelError(f"Embedding file {path} is empty")

    generator = torch.Generator().manual_seed(seed)
    table = torch.empty(len(vocab), width, dtype=torch.float64).uniform_(
        -EMBEDDING_INIT_RANGE, EMBEDDING_INIT_RANGE, generator=generator
    )
    for index, token in enumerate(vocab.tokens):
        if token in vectors:
            table[index] = torch.tensor(vectors[token], dtype=torch.float64)
    table[PAD_INDEX] = 0.0
    logger.info(f"Embeddings: {len(vectors)} of {len(vocab) - 2} vocabulary tokens found in {path}")
    return table.to(dtype)


class QuestionEncoder(nn.Module):
    """Word embedding followed by a single-layer LSTM; returns the final hidden state."""

    def __init__(self, vocab_size: int, embedding_dim: int, hidden_dim: int, embeddings: Optional[torch.Tensor] = None):
        super().__init__()
        self.embedding = nn.Embedding(vocab_size, embedding_dim, padding_idx=PAD_INDEX)
        if embeddings is not None:
            if tuple(embeddings.shape) != (vocab_size, embedding_dim):
                raise ModelError(
                    f"Embedding table has shape {tuple(embeddings.shape)}, expected {(vocab_size, embedding_dim)}"
                )
            with torch.no_grad():
                self.embedding.weight.copy_(embeddings)
        self.lstm = nn.LSTM(embedding_dim, hidden_dim, num_layers=1, batch_first=True)
        self.output_dim = hidden_dim

    def forward(self, tokens: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        embedded = self.embedding(tokens)
        packed = pack_padded_sequence(
            embedded, lengths.clamp(min=1).cpu(), batch_first=True, enforce_sorted=False
        )
        _, (hidden, _) = self.lstm(packed)
        return hidden[-1]


def _small_backbone() -> nn.Sequential:
    layers, in_channels = [], 3
    for channels, pool in zip(SMALL_CHANNELS, SMALL_POOLS):
        layers += [nn.Conv2d(in_channels, channels, kernel_size=3, padding=1), nn.ReLU(), nn.MaxPool2d(pool)]
        in_channels = channels
    return nn.Sequential(*layers)


def _vgg16_backbone(asset: Optional[str], load_asset: bool = True) -> nn.Sequential:
    if not load_asset:
        return vgg16(weights=None).features
    if not asset:
        raise ModelError("The vgg16 backbone needs model.backbone_asset (a directory in checkpoint format)")
    if not Path(asset).is_dir():
        raise ModelError(f"Backbone asset not found: {asset}")
    features = vgg16(weights=None).features
    arrays, _ = read_named_arrays(asset)
    arrays = OrderedDict(
        (name[len("features."):] if name.startswith("features.") else name, array) for name, array in arrays.items()
    )
    load_arrays_into(features, arrays)
    logger.info(f"Loaded VGG-16 feature weights from {asset}")
    return features


class ImageEncoder(nn.Module):
    """
    Convolutional feature grid of a square, normalized image.

    `small` is a from-scratch 4-block net (64 channels); `vgg16` is the VGG-16
    feature stack up to its last conv block (512 channels). Both reduce the
    input by 32, i.e. 7x7 at 224. `load_asset=False` skips reading the VGG-16
    weights when they are about to be replaced from a checkpoint.
    """

    def __init__(
        self, backbone: str = "small", image_size: int = 224, asset: Optional[str] = None, load_asset: bool = True
    ):
        super().__init__()
        if image_size % BACKBONE_STRIDE:
            raise ModelError(f"Image size {image_size} is not a multiple of {BACKBONE_STRIDE}")
        if backbone == "small":
            self.features = _small_backbone()
            self.output_channels = SMALL_CHANNELS[-1]
        elif backbone == "vgg16":
            self.features = _vgg16_backbone(asset, load_asset)
            self.output_channels = VGG_CHANNELS
        else:
            raise ModelError(f"Unknown backbone: {backbone}")
        self.backbone = backbone
        self.image_size = image_size
        self.grid_size = image_size // BACKBONE_STRIDE

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        if images.dim() != 4 or images.shape[1] != 3 or tuple(images.shape[-2:]) != (self.image_size, self.image_size):
            raise ModelError(
                f"Image batch has shape {tuple(images.shape)}, expected (B, 3, {self.image_size}, {self.image_size})"
            )
        return self.features(images)


class SizeEncoder(nn.Module):
    """ReLU(FC(width / divisor, height / divisor))."""

    def __init__(self, output_dim: int, divisor: float = 1024.0):
        super().__init__()
        self.fc = nn.Linear(2, output_dim)
        self.divisor = divisor
        self.output_dim = output_dim

    def forward(self, sizes: torch.Tensor) -> torch.Tensor:
        if torch.any(sizes <= 0):
            raise ModelError("Image width and height must be positive")
        return torch.relu(self.fc(sizes / self.divisor))
