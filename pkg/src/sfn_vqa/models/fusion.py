"""
Fusion stages.

  I    question-driven attention: G glimpses over the image grid, concatenated with q
  II   [I ; size encoding]
  III  [II ; fact C1 ; fact C2 ; fact C3]

The concatenation order is part of the checkpoint contract.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import torch
from torch import nn

from sfn_vqa.core.exceptions import ModelError


class FusionStage(str, Enum):
    I = "I"
    II = "II"
    III = "III"


@dataclass(frozen=True)
class FusedRepresentation:
    vector: torch.Tensor  # (B, width)
    stage: FusionStage

    @property
    def width(self) -> int:
        return self.vector.shape[-1]


def glimpse_weights(logits: torch.Tensor) -> torch.Tensor:
    """Softmax over grid positions: (B, G, N) logits -> (B, G, N) weights."""
    if logits.shape[-1] == 0:
        raise ModelError("Attention over an empty spatial grid")
    return torch.softmax(logits, dim=-1)


def apply_glimpses(features: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    """(B, C, N) features and (B, G, N) weights -> (B, G*C) glimpse sums, glimpse-major."""
    attended = torch.einsum("bgn,bcn->bgc", weights, features)
    return attended.reshape(features.shape[0], -1)


class QuestionDrivenAttention(nn.Module):
    """
    Fusion I. The question vector is tiled over the grid and concatenated with
    every spatial feature; a 1x1 convolution scores G glimpse maps.
    """

    def __init__(self, feature_channels: int, question_dim: int, glimpses: int = 2):
        super().__init__()
        self.scorer = nn.Conv2d(feature_channels + question_dim, glimpses, kernel_size=1)
        self.glimpses = glimpses
        self.feature_channels = feature_channels
        self.question_dim = question_dim

    @property
    def output_dim(self) -> int:
        return self.glimpses * self.feature_channels + self.question_dim

    def attention(self, q: torch.Tensor, features: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """Return (weights (B, G, N), flattened features (B, C, N))."""
        batch, channels, height, width = features.shape
        if height * width == 0:
            raise ModelError("Attention over an empty spatial grid")
        if channels != self.feature_channels or q.shape[-1] != self.question_dim:
            raise ModelError(
                f"Fusion I expects {self.feature_channels} feature channels and question width "
                f"{self.question_dim}, got {channels} and {q.shape[-1]}"
            )
        tiled = q[:, :, None, None].expand(batch, q.shape[-1], height, width)
        logits = self.scorer(torch.cat([features, tiled], dim=1)).reshape(batch, self.glimpses, height * width)
        return glimpse_weights(logits), features.reshape(batch, channels, height * width)

    def forward(self, q: torch.Tensor, features: torch.Tensor) -> FusedRepresentation:
        weights, flat = self.attention(q, features)
        return FusedRepresentation(torch.cat([apply_glimpses(flat, weights), q], dim=1), FusionStage.I)


def fusion_ii_concat(a: FusedRepresentation, size_encoding: torch.Tensor) -> FusedRepresentation:
    if a.stage is not FusionStage.I:
        raise ModelError(f"Fusion II needs a stage I representation, got stage {a.stage.value}")
    return FusedRepresentation(torch.cat([a.vector, size_encoding], dim=-1), FusionStage.II)


def fusion_iii_concat(b: FusedRepresentation, facts) -> FusedRepresentation:
    """[b ; modality ; plane ; organ]; `facts` is a SupportingFacts."""
    if b.stage is not FusionStage.II:
        raise ModelError(f"Fusion III needs a stage II representation, got stage {b.stage.value}")
    parts = [b.vector]
    for name in ("modality", "plane", "organ"):
        fact = getattr(facts, name, None)
        if fact is None:
            raise ModelError(f"Fusion III is missing the {name} supporting fact")
        parts.append(fact)
    return FusedRepresentation(torch.cat(parts, dim=-1), FusionStage.III)
