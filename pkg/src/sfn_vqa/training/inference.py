"""
Prediction and evaluation with a trained if1c or sfn checkpoint.
"""

from pathlib import Path
from typing import Dict, List, Tuple

import torch
from torch import nn

from sfn_vqa.config.config import AppConfig, DataConfig
from sfn_vqa.core.exceptions import DatasetError
from sfn_vqa.core.logging import get_logger
from sfn_vqa.data.batching import QuestionImageDataset
from sfn_vqa.data.types import DatasetSplit
from sfn_vqa.metrics.scores import MetricsReport, compute_report
from sfn_vqa.models.model import model_from_checkpoint, settings_to_config
from sfn_vqa.models.reasoning import Prediction
from sfn_vqa.training.checkpoint import Checkpoint, load_checkpoint
from sfn_vqa.training.loop import make_loader

logger = get_logger(__name__)


def load_model(directory) -> Tuple[nn.Module, Checkpoint]:
    checkpoint = load_checkpoint(Path(directory))
    return model_from_checkpoint(checkpoint), checkpoint


def _data_config(checkpoint: Checkpoint, config: AppConfig) -> DataConfig:
    """The run's data settings with the image size the checkpoint was trained at."""
    _, image_size, _ = settings_to_config(checkpoint.model_config)
    return config.data.model_copy(update={"image_size": image_size})


@torch.no_grad()
def predict_split(model: nn.Module, checkpoint: Checkpoint, split: DatasetSplit, config: AppConfig) -> List[Prediction]:
    """Predictions for every sample of `split`, in split order."""
    dataset = QuestionImageDataset(split, checkpoint.vocab, _data_config(checkpoint, config))
    loader = make_loader(dataset, config.training.batch_size, config.runtime.threads)
    model.eval()
    predictions: List[Prediction] = []
    for batch in loader:
        predictions.extend(model.predict_full(batch))
    return predictions


def evaluate_splits(
    model: nn.Module,
    checkpoint: Checkpoint,
    splits: Dict[str, DatasetSplit],
    config: AppConfig,
) -> Tuple[Dict[str, MetricsReport], Dict[str, List[str]]]:
    """
    Score the model on each answered split.

    Returns the metrics report and the predicted answers per split; the
    per-category breakdown uses the gold derived category.
    """
    reports: Dict[str, MetricsReport] = {}
    answers: Dict[str, List[str]] = {}
    for name, split in splits.items():
        if len(split) == 0 or not split.has_answers:
            raise DatasetError(f"Split '{name}' has no answers to evaluate against")
        answers[name] = [p.answer for p in predict_split(model, checkpoint, split, config)]
        reports[name] = compute_report(
            answers[name],
            [s.answer for s in split],
            [s.derived_category for s in split],
            bleu_variant=config.metrics.bleu,
        )
        logger.info(
            f"{name}: F1 {reports[name].f1:.4f}, strict accuracy {reports[name].strict_accuracy:.4f}, "
            f"BLEU {reports[name].bleu:.4f} over {len(split)} samples"
        )
    return reports, answers
