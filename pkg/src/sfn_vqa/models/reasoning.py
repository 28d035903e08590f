"""
Reasoning modules: the question categorizer, two-layer classifier heads, the
support networks and the SFN reasoner, plus answer fusion.
"""

from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple

import numpy as np
import torch
from torch import nn

from sfn_vqa.core.exceptions import ModelError
from sfn_vqa.data.dictionaries import AnswerDictionary, answer_category
from sfn_vqa.data.types import CATEGORY_ORDER, NUM_CATEGORIES, SUPPORT_CATEGORIES, CategoryLabel
from sfn_vqa.models.encoders import QuestionEncoder
from sfn_vqa.models.fusion import FusedRepresentation, FusionStage, fusion_iii_concat


class QuestionCategorizer(nn.Module):
    """Embedding + LSTM + FC-ReLU-FC over the five categories. Owns its own embedding."""

    def __init__(self, vocab_size: int, embedding_dim: int, hidden_dim: int, fc_dim: int, embeddings=None):
        super().__init__()
        self.encoder = QuestionEncoder(vocab_size, embedding_dim, hidden_dim, embeddings)
        self.fc1 = nn.Linear(hidden_dim, fc_dim)
        self.fc2 = nn.Linear(fc_dim, NUM_CATEGORIES)

    def forward(self, tokens: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        return self.fc2(torch.relu(self.fc1(self.encoder(tokens, lengths))))

    def distribution(self, tokens: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        """(B, 5) category probabilities."""
        return torch.softmax(self.forward(tokens, lengths), dim=-1)


class TwoLayerClassifier(nn.Module):
    """FC - ReLU - Dropout - FC. Used for IF-1C, the C4 and Binary heads and the pretraining head."""

    def __init__(self, in_dim: int, hidden_dim: int, n_classes: int, dropout: float = 0.5):
        super().__init__()
        if n_classes < 1:
            raise ModelError("A classifier head needs at least one answer class")
        self.fc1 = nn.Linear(in_dim, hidden_dim)
        self.dropout = nn.Dropout(dropout)
        self.fc2 = nn.Linear(hidden_dim, n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.dropout(torch.relu(self.fc1(x))))


class SupportNetwork(nn.Module):
    """Two FC layers producing the supporting fact, then a single FC final classifier."""

    def __init__(self, in_dim: int, hidden_dim: int, support_dim: int, n_classes: int, dropout: float = 0.5):
        super().__init__()
        if n_classes < 1:
            raise ModelError("A classifier head needs at least one answer class")
        self.fc1 = nn.Linear(in_dim, hidden_dim)
        self.dropout = nn.Dropout(dropout)
        self.fc2 = nn.Linear(hidden_dim, support_dim)
        self.classifier = nn.Linear(support_dim, n_classes)

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        fact = torch.relu(self.fc2(self.dropout(torch.relu(self.fc1(x)))))
        return fact, self.classifier(fact)


@dataclass(frozen=True)
class SupportingFacts:
    modality: torch.Tensor
    plane: torch.Tensor
    organ: torch.Tensor


class SFNReasoner(nn.Module):
    """
    Five heads over a Fusion II representation.

    C1-C3 are support networks whose facts feed Fusion III; the C4 and Binary
    heads read the Fusion III vector. With facts disabled they read Fusion II.
    """

    def __init__(
        self,
        in_dim: int,
        class_counts: Mapping[CategoryLabel, int],
        classifier_dim: int = 256,
        support_dim: int = 64,
        dropout: float = 0.5,
        facts: bool = True,
    ):
        super().__init__()
        for category in CATEGORY_ORDER:
            if class_counts.get(category, 0) < 1:
                raise ModelError(f"Head {category.value} has an empty answer dictionary")
        self.use_facts = facts
        self.support = nn.ModuleDict(
            {
                c.value: SupportNetwork(in_dim, classifier_dim, support_dim, class_counts[c], dropout)
                for c in SUPPORT_CATEGORIES
            }
        )
        head_in = in_dim + len(SUPPORT_CATEGORIES) * support_dim if facts else in_dim
        self.heads = nn.ModuleDict(
            {
                c.value: TwoLayerClassifier(head_in, classifier_dim, class_counts[c], dropout)
                for c in (CategoryLabel.ABNORMALITY, CategoryLabel.BINARY)
            }
        )
        self.head_input_dim = head_in

    def forward(self, b: FusedRepresentation) -> Tuple[Dict[CategoryLabel, torch.Tensor], SupportingFacts]:
        if b.stage is not FusionStage.II:
            raise ModelError(f"The reasoner needs a stage II representation, got stage {b.stage.value}")
        logits: Dict[CategoryLabel, torch.Tensor] = {}
        facts = {}
        for category in SUPPORT_CATEGORIES:
            facts[category], logits[category] = self.support[category.value](b.vector)
        supporting = SupportingFacts(
            modality=facts[CategoryLabel.MODALITY],
            plane=facts[CategoryLabel.PLANE],
            organ=facts[CategoryLabel.ORGAN],
        )
        head_input = fusion_iii_concat(b, supporting).vector if self.use_facts else b.vector
        for category in (CategoryLabel.ABNORMALITY, CategoryLabel.BINARY):
            logits[category] = self.heads[category.value](head_input)
        return logits, supporting


# ============================================================================
# ANSWER FUSION
# ============================================================================

@dataclass(frozen=True)
class Prediction:
    category: CategoryLabel
    answer: str
    confidence: float
    per_head_logits: Dict[CategoryLabel, np.ndarray]


def _softmax(values: np.ndarray) -> np.ndarray:
    shifted = np.exp(values - values.max())
    return shifted / shifted.sum()


def answer_fusion(
    distribution,
    heads: Mapping[CategoryLabel, object],
    dictionaries: Mapping[CategoryLabel, AnswerDictionary],
) -> Prediction:
    """
    Pick the argmax category, then the argmax answer of that category's head.

    Ties resolve to the lowest index (category order C1, C2, C3, C4, Binary; class
    order of the dictionary). Confidence is the chosen head's softmax at the answer.
    """
    missing = [c.value for c in CATEGORY_ORDER if c not in heads]
    if missing:
        raise ModelError(f"Answer fusion needs all five heads, missing {', '.join(missing)}")
    dist = np.asarray(_as_numpy(distribution), dtype=np.float64)
    category = CATEGORY_ORDER[int(np.argmax(dist))]
    per_head = {c: np.asarray(_as_numpy(heads[c]), dtype=np.float64) for c in CATEGORY_ORDER}
    chosen = per_head[category]
    if chosen.size != len(dictionaries[category]):
        raise ModelError(
            f"Head {category.value} has {chosen.size} logits but its dictionary has {len(dictionaries[category])} answers"
        )
    class_index = int(np.argmax(chosen))
    return Prediction(
        category=category,
        answer=dictionaries[category].decode(class_index),
        confidence=float(_softmax(chosen)[class_index]),
        per_head_logits=per_head,
    )


def global_prediction(logits, dictionary: AnswerDictionary, dictionaries: Optional[Mapping[CategoryLabel, AnswerDictionary]] = None) -> Prediction:
    """IF-1C prediction; the category is the first one whose dictionary holds the answer."""
    values = np.asarray(_as_numpy(logits), dtype=np.float64)
    class_index = int(np.argmax(values))
    answer = dictionary.decode(class_index)
    category = CategoryLabel.ABNORMALITY
    if dictionaries is not None:
        category = answer_category(answer, dictionaries, default=CategoryLabel.ABNORMALITY)
    return Prediction(category, answer, float(_softmax(values)[class_index]), {})


def _as_numpy(values) -> np.ndarray:
    if isinstance(values, torch.Tensor):
        return values.detach().cpu().double().numpy()
    return np.asarray(values)
