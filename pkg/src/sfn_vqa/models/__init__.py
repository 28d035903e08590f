# __init__.py

from .encoders import ImageEncoder, QuestionEncoder, SizeEncoder, load_embeddings
from .fusion import (
    FusedRepresentation,
    FusionStage,
    QuestionDrivenAttention,
    fusion_ii_concat,
    fusion_iii_concat,
)
from .reasoning import (
    Prediction,
    QuestionCategorizer,
    SFNReasoner,
    SupportingFacts,
    SupportNetwork,
    TwoLayerClassifier,
    answer_fusion,
)
from .model import CategorizerModel, IF1CModel, InputFusion, SFNModel, model_from_checkpoint

__all__ = [
    "ImageEncoder",
    "QuestionEncoder",
    "SizeEncoder",
    "load_embeddings",
    "FusedRepresentation",
    "FusionStage",
    "QuestionDrivenAttention",
    "fusion_ii_concat",
    "fusion_iii_concat",
    "Prediction",
    "QuestionCategorizer",
    "SFNReasoner",
    "SupportingFacts",
    "SupportNetwork",
    "TwoLayerClassifier",
    "answer_fusion",
    "CategorizerModel",
    "IF1CModel",
    "InputFusion",
    "SFNModel",
    "model_from_checkpoint",
]
