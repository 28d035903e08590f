"""
Model assembly for each training stage.

    categorizer   CategorizerModel  question -> 5 categories
    input_fusion  IF1CModel         encoders + Fusion I/II + temporary head (C4 excluded)
    if1c          IF1CModel         encoders + Fusion I/II + one head over all answers
    sfn           SFNModel          frozen categorizer + encoders + Fusion I/II + SFN reasoner

Every model exposes loss(batch) and predict(batch); checkpoints hold the full
state_dict except for input_fusion, which keeps only the `fusion.` arrays.
"""

from typing import Any, Dict, List, Mapping, Optional

import torch
from torch import nn

from sfn_vqa.config.config import ModelConfig
from sfn_vqa.core.exceptions import StageError
from sfn_vqa.data.batching import Batch
from sfn_vqa.data.dictionaries import AnswerDictionary
from sfn_vqa.data.types import CATEGORY_ORDER, CategoryLabel
from sfn_vqa.models.encoders import ImageEncoder, QuestionEncoder, SizeEncoder
from sfn_vqa.models.fusion import FusedRepresentation, QuestionDrivenAttention, fusion_ii_concat
from sfn_vqa.models.reasoning import (
    Prediction,
    QuestionCategorizer,
    SFNReasoner,
    TwoLayerClassifier,
    answer_fusion,
    global_prediction,
)
from sfn_vqa.training.checkpoint import Checkpoint, load_arrays_into
from sfn_vqa.training.losses import masked_cross_entropy, multitask_loss

CATEGORIZER_KEYS = ("embedding_dim", "question_dim", "categorizer_dim")
FUSION_KEYS = ("backbone", "embedding_dim", "question_dim", "size_dim", "size_divisor", "glimpses", "image_size")


class InputFusion(nn.Module):
    """Question, image and size encoders joined by Fusion I and Fusion II."""

    def __init__(
        self,
        vocab_size: int,
        config: ModelConfig,
        image_size: int = 224,
        embeddings: Optional[torch.Tensor] = None,
        load_asset: bool = True,
    ):
        super().__init__()
        self.question = QuestionEncoder(vocab_size, config.embedding_dim, config.question_dim, embeddings)
        self.image = ImageEncoder(config.backbone, image_size, config.backbone_asset, load_asset)
        self.size = SizeEncoder(config.size_dim, config.size_divisor)
        self.attention = QuestionDrivenAttention(self.image.output_channels, config.question_dim, config.glimpses)

    @property
    def output_dim(self) -> int:
        return self.attention.output_dim + self.size.output_dim

    def forward(self, batch: Batch) -> FusedRepresentation:
        q = self.question(batch.tokens, batch.lengths)
        fused = self.attention(q, self.image(batch.images))
        return fusion_ii_concat(fused, self.size(batch.sizes))


class CategorizerModel(nn.Module):
    def __init__(self, vocab_size: int, config: ModelConfig, embeddings: Optional[torch.Tensor] = None):
        super().__init__()
        self.categorizer = QuestionCategorizer(
            vocab_size, config.embedding_dim, config.question_dim, config.categorizer_dim, embeddings
        )

    def forward(self, batch: Batch) -> torch.Tensor:
        return self.categorizer(batch.tokens, batch.lengths)

    def loss(self, batch: Batch) -> Optional[torch.Tensor]:
        return masked_cross_entropy(self.forward(batch), batch.categories)

    @torch.no_grad()
    def predict(self, batch: Batch) -> List[str]:
        """Predicted category labels ('C1'..'Binary')."""
        indices = torch.argmax(self.forward(batch), dim=-1).tolist()
        return [CATEGORY_ORDER[i].value for i in indices]


class IF1CModel(nn.Module):
    """Input Fusion followed by one two-layer classifier over a single dictionary."""

    def __init__(
        self,
        vocab_size: int,
        dictionary: AnswerDictionary,
        config: ModelConfig,
        image_size: int = 224,
        dropout: float = 0.5,
        embeddings: Optional[torch.Tensor] = None,
        dictionaries: Optional[Mapping[CategoryLabel, AnswerDictionary]] = None,
        load_asset: bool = True,
    ):
        super().__init__()
        self.fusion = InputFusion(vocab_size, config, image_size, embeddings, load_asset)
        self.head = TwoLayerClassifier(self.fusion.output_dim, config.classifier_dim, len(dictionary), dropout)
        self.dictionary = dictionary
        self.dictionaries = dictionaries

    def forward(self, batch: Batch) -> torch.Tensor:
        return self.head(self.fusion(batch).vector)

    def loss(self, batch: Batch) -> Optional[torch.Tensor]:
        return masked_cross_entropy(self.forward(batch), batch.global_targets)

    @torch.no_grad()
    def predict_full(self, batch: Batch) -> List[Prediction]:
        logits = self.forward(batch)
        return [global_prediction(row, self.dictionary, self.dictionaries) for row in logits]

    def predict(self, batch: Batch) -> List[str]:
        return [p.answer for p in self.predict_full(batch)]


class SFNModel(nn.Module):
    """Frozen categorizer routing between the five reasoner heads."""

    def __init__(
        self,
        vocab_size: int,
        dictionaries: Mapping[CategoryLabel, AnswerDictionary],
        config: ModelConfig,
        image_size: int = 224,
        dropout: float = 0.5,
        embeddings: Optional[torch.Tensor] = None,
        load_asset: bool = True,
    ):
        super().__init__()
        self.categorizer = QuestionCategorizer(
            vocab_size, config.embedding_dim, config.question_dim, config.categorizer_dim
        )
        self.fusion = InputFusion(vocab_size, config, image_size, embeddings, load_asset)
        self.reasoner = SFNReasoner(
            self.fusion.output_dim,
            {c: len(dictionaries[c]) for c in CATEGORY_ORDER},
            classifier_dim=config.classifier_dim,
            support_dim=config.support_dim,
            dropout=dropout,
            facts=config.facts,
        )
        self.dictionaries = dict(dictionaries)
        self.freeze_categorizer()

    def freeze_categorizer(self) -> None:
        for parameter in self.categorizer.parameters():
            parameter.requires_grad_(False)
        self.categorizer.eval()

    def train(self, mode: bool = True) -> "SFNModel":
        super().train(mode)
        self.categorizer.eval()
        return self

    def forward(self, batch: Batch):
        return self.reasoner(self.fusion(batch))

    def loss(self, batch: Batch) -> Optional[torch.Tensor]:
        logits, _ = self.forward(batch)
        total, _ = multitask_loss(logits, batch.categories, batch.targets)
        return total

    @torch.no_grad()
    def predict_full(self, batch: Batch) -> List[Prediction]:
        distribution = self.categorizer.distribution(batch.tokens, batch.lengths)
        logits, _ = self.forward(batch)
        return [
            answer_fusion(distribution[row], {c: logits[c][row] for c in CATEGORY_ORDER}, self.dictionaries)
            for row in range(len(batch))
        ]

    def predict(self, batch: Batch) -> List[str]:
        return [p.answer for p in self.predict_full(batch)]


def apply_freeze(model: nn.Module, embeddings: bool = False, backbone: bool = False) -> None:
    """Freeze the question embedding and/or the image backbone of a fusion-bearing model."""
    fusion = getattr(model, "fusion", None)
    if fusion is None:
        return
    if embeddings:
        fusion.question.embedding.weight.requires_grad_(False)
    if backbone:
        for parameter in fusion.image.parameters():
            parameter.requires_grad_(False)


# ============================================================================
# CHECKPOINT CONVERSION
# ============================================================================

def model_settings(config: ModelConfig, image_size: int, dropout: float) -> Dict[str, Any]:
    """Model description stored in a checkpoint manifest."""
    return {**config.model_dump(mode="json"), "image_size": image_size, "dropout": dropout}


def settings_to_config(settings: Mapping[str, Any]):
    fields = {k: v for k, v in settings.items() if k in ModelConfig.model_fields}
    return ModelConfig.model_validate(fields), int(settings.get("image_size", 224)), float(settings.get("dropout", 0.5))


def check_compatible(stage: str, settings: Mapping[str, Any], config: ModelConfig, image_size: int, keys) -> None:
    """Raise StageError when a pretrained stage was built with different model settings."""
    current = model_settings(config, image_size, 0.0)
    for key in keys:
        if settings.get(key) != current.get(key):
            raise StageError(
                f"The {stage} checkpoint was built with model.{key}={settings.get(key)!r}, "
                f"the current configuration has {current.get(key)!r}"
            )


def model_from_checkpoint(checkpoint: Checkpoint) -> nn.Module:
    """Rebuild a categorizer, if1c or sfn model from its checkpoint."""
    if checkpoint.vocab is None:
        raise StageError(f"The {checkpoint.stage} checkpoint has no vocabulary")
    config, image_size, dropout = settings_to_config(checkpoint.model_config)
    vocab_size = len(checkpoint.vocab)
    if checkpoint.stage == "categorizer":
        model = CategorizerModel(vocab_size, config)
    elif checkpoint.stage == "if1c":
        if checkpoint.global_dictionary is None:
            raise StageError("The if1c checkpoint has no global answer dictionary")
        model = IF1CModel(
            vocab_size, checkpoint.global_dictionary, config, image_size, dropout,
            dictionaries=checkpoint.dictionaries, load_asset=False,
        )
    elif checkpoint.stage == "sfn":
        if checkpoint.dictionaries is None:
            raise StageError("The sfn checkpoint has no answer dictionaries")
        model = SFNModel(vocab_size, checkpoint.dictionaries, config, image_size, dropout, load_asset=False)
    else:
        raise StageError(f"Checkpoints of stage '{checkpoint.stage}' cannot be used for inference")
    load_arrays_into(model, checkpoint.arrays)
    model.eval()
    return model

