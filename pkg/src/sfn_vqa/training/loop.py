"""
Optimization loop shared by all stages.

One optimizer step per batch; the validation macro-F1 after each epoch decides
which weights are kept. Every epoch appends a row to the CSV training log.
"""

import copy
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import pandas as pd
import torch
from torch import nn
from torch.utils.data import DataLoader, Dataset, RandomSampler, Sampler

from sfn_vqa.config.config import TrainingConfig
from sfn_vqa.core.exceptions import SFNError, StageError
from sfn_vqa.core.logging import get_logger
from sfn_vqa.data.batching import collate_batch
from sfn_vqa.metrics.scores import precision_recall_f1, strict_accuracy

logger = get_logger(__name__)

LOG_COLUMNS = ["epoch", "stage", "train_loss", "val_precision", "val_recall", "val_f1", "val_accuracy"]
MAX_WORKERS = 4


@dataclass
class EpochRecord:
    epoch: int
    stage: str
    train_loss: float
    val_precision: float
    val_recall: float
    val_f1: float
    val_accuracy: float


def configure_runtime(threads: int, seed: int) -> None:
    """Seed torch; a single thread selects the deterministic mode."""
    torch.manual_seed(seed)
    if threads == 1:
        torch.set_num_threads(1)


def worker_count(threads: int) -> int:
    return 0 if threads <= 1 else min(threads - 1, MAX_WORKERS)


def make_loader(
    dataset: Dataset,
    batch_size: int,
    threads: int = 1,
    sampler: Optional[Sampler] = None,
) -> DataLoader:
    """
    Batches in sampler order, or in dataset order when no sampler is given.

    Workers persist across epochs so that their decoded-image caches are reused.
    """
    workers = worker_count(threads)
    return DataLoader(
        dataset,
        batch_size=batch_size,
        sampler=sampler,
        shuffle=False,
        collate_fn=collate_batch,
        num_workers=workers,
        persistent_workers=workers > 0,
    )


def shuffled_sampler(dataset: Dataset, generator: torch.Generator) -> RandomSampler:
    return RandomSampler(dataset, generator=generator)


def make_optimizer(model: nn.Module, config: TrainingConfig) -> torch.optim.Adam:
    """Adam over the trainable parameters only."""
    parameters = [p for p in model.parameters() if p.requires_grad]
    if not parameters:
        raise StageError(f"Stage '{config.stage}' has no trainable parameters")
    return torch.optim.Adam(parameters, lr=config.learning_rate, betas=tuple(config.betas), eps=config.eps)


def train_epoch(model: nn.Module, loader: DataLoader, optimizer: torch.optim.Optimizer) -> float:
    """One pass over the loader; returns the mean loss of the batches that had a loss."""
    model.train()
    total, batches = 0.0, 0
    for batch in loader:
        optimizer.zero_grad()
        loss = model.loss(batch)
        if loss is None:
            continue
        loss.backward()
        optimizer.step()
        total += float(loss.detach())
        batches += 1
    return total / batches if batches else 0.0


@torch.no_grad()
def predict_loader(model: nn.Module, loader: DataLoader) -> List[str]:
    model.eval()
    predictions: List[str] = []
    for batch in loader:
        predictions.extend(model.predict(batch))
    return predictions


def score(predictions: Sequence[str], gold: Sequence[str]) -> Tuple[float, float, float, float]:
    if not gold:
        return 0.0, 0.0, 0.0, 0.0
    p, r, f1 = precision_recall_f1(predictions, gold)
    return p, r, f1, strict_accuracy(predictions, gold)


def write_log(history: List[EpochRecord], path: Path) -> None:
    try:
        pd.DataFrame([asdict(r) for r in history], columns=LOG_COLUMNS).to_csv(
            path, index=False, float_format="%.6f", lineterminator="\n"
        )
    except OSError as e:
        raise SFNError(f"Cannot write training log {path}: {e}") from e


def fit(
    model: nn.Module,
    train_loader: DataLoader,
    validate: Callable[[nn.Module], Optional[Tuple[float, float, float, float]]],
    config: TrainingConfig,
    log_path: Optional[Path] = None,
) -> List[EpochRecord]:
    """
    Train for config.epochs epochs and restore the weights of the best epoch.

    Best means highest validation macro-F1; the earliest epoch wins ties. With
    zero epochs the model keeps its initial weights. When `validate` returns None
    (no validation data) the last epoch is kept.
    """
    optimizer = make_optimizer(model, config)
    history: List[EpochRecord] = []
    best_f1, best_state = -1.0, copy.deepcopy(model.state_dict())
    for epoch in range(1, config.epochs + 1):
        train_loss = train_epoch(model, train_loader, optimizer)
        scores = validate(model)
        precision, recall, f1, accuracy = scores if scores is not None else (0.0, 0.0, 0.0, 0.0)
        record = EpochRecord(epoch, config.stage or "", train_loss, precision, recall, f1, accuracy)
        history.append(record)
        logger.info(
            f"[{record.stage}] epoch {epoch}/{config.epochs}: loss {train_loss:.4f}, "
            f"val P {precision:.4f} R {recall:.4f} F1 {f1:.4f} acc {accuracy:.4f}"
        )
        if scores is None or f1 > best_f1:
            best_f1, best_state = f1, copy.deepcopy(model.state_dict())
        if log_path is not None:
            write_log(history, log_path)
    model.load_state_dict(best_state)
    model.eval()
    return history
