"""
The staged training protocol.

    pretrain_categorizer   question -> category, trained on every training sample
    pretrain_input_fusion  encoders + Fusion I/II with a temporary head, C4 excluded
    train_model            if1c or sfn on top of the pretrained stages

Each stage reseeds torch from training.seed, so rerunning a stage with the same
inputs in single-threaded mode reproduces its checkpoint byte for byte.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

import torch
from torch import nn

from sfn_vqa.config.config import AppConfig, TrainingConfig, fingerprint
from sfn_vqa.core.decorators import log_stage_execution
from sfn_vqa.core.exceptions import DatasetError, StageError
from sfn_vqa.core.logging import get_logger
from sfn_vqa.data.batching import QuestionImageDataset
from sfn_vqa.data.dictionaries import AnswerDictionary, build_answer_dictionaries, build_global_dictionary
from sfn_vqa.data.text import Vocabulary, build_vocabulary
from sfn_vqa.data.types import CategoryLabel, DatasetSplit
from sfn_vqa.models.encoders import load_embeddings
from sfn_vqa.models.model import (
    CATEGORIZER_KEYS,
    FUSION_KEYS,
    CategorizerModel,
    IF1CModel,
    SFNModel,
    apply_freeze,
    check_compatible,
    model_settings,
)
from sfn_vqa.sampling import compute_weights, make_generator, make_sampler
from sfn_vqa.training.checkpoint import Checkpoint, arrays_from_module, load_arrays_into, save_checkpoint
from sfn_vqa.training.loop import (
    EpochRecord,
    configure_runtime,
    fit,
    make_loader,
    predict_loader,
    score,
    shuffled_sampler,
)

logger = get_logger(__name__)

TRAINING_LOG = "training_log.csv"
FUSION_PRETRAINING_CATEGORIES = (
    CategoryLabel.MODALITY,
    CategoryLabel.PLANE,
    CategoryLabel.ORGAN,
    CategoryLabel.BINARY,
)
PRETRAINED_REQUIREMENTS: Dict[str, Tuple[str, ...]] = {
    "if1c": ("input_fusion",),
    "sfn": ("categorizer", "input_fusion"),
}


@dataclass
class _StageInputs:
    training: TrainingConfig
    vocab: Vocabulary
    dictionaries: Dict[CategoryLabel, AnswerDictionary]
    global_dictionary: AnswerDictionary
    embeddings: Optional[torch.Tensor]
    generator: torch.Generator


def _check_answered(split: DatasetSplit, name: str) -> None:
    if len(split) == 0:
        raise DatasetError(f"The {name} split is empty")
    if not split.has_answers:
        raise DatasetError(f"The {name} split has unanswered samples; stages train and validate on answered data")


def _prepare(
    stage: str,
    train: DatasetSplit,
    valid: DatasetSplit,
    config: AppConfig,
    vocab: Optional[Vocabulary] = None,
    with_embeddings: bool = True,
) -> _StageInputs:
    _check_answered(train, "training")
    if len(valid):
        _check_answered(valid, "validation")
    training = config.training.for_stage(stage)
    configure_runtime(config.runtime.threads, training.seed)
    vocab = vocab if vocab is not None else build_vocabulary(train)
    embeddings = None
    if with_embeddings and config.model.embeddings:
        embeddings = load_embeddings(config.model.embeddings, vocab, seed=training.seed)
    return _StageInputs(
        training=training,
        vocab=vocab,
        dictionaries=build_answer_dictionaries(train),
        global_dictionary=build_global_dictionary(train),
        embeddings=embeddings,
        generator=make_generator(training.seed),
    )


def _answer_loader(
    split: DatasetSplit,
    dataset: QuestionImageDataset,
    config: AppConfig,
    inputs: _StageInputs,
    dictionaries: Mapping[CategoryLabel, AnswerDictionary],
):
    """Training batches: inverse-frequency weighted draws, or a seeded shuffle."""
    if config.sampling.weighted:
        weights = compute_weights(split, dictionaries, config.sampling.balance_categories)
        sampler = make_sampler(weights, len(split), inputs.generator)
    else:
        sampler = shuffled_sampler(dataset, inputs.generator)
    return make_loader(dataset, inputs.training.batch_size, config.runtime.threads, sampler)


def _validator(dataset: QuestionImageDataset, gold: List[str], config: AppConfig, batch_size: int):
    loader = make_loader(dataset, batch_size, config.runtime.threads)

    def validate(model: nn.Module):
        if not gold:
            return None
        return score(predict_loader(model, loader), gold)

    return validate


def _log_path(out_dir: Optional[Path]) -> Optional[Path]:
    if out_dir is None:
        return None
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / TRAINING_LOG


def _metadata(history: List[EpochRecord], train: DatasetSplit, validated: bool = True) -> Dict[str, object]:
    if validated:
        best = max(history, key=lambda r: (r.val_f1, -r.epoch), default=None)
    else:
        best = history[-1] if history else None
    return {
        "epochs": len(history),
        "best_epoch": best.epoch if best else 0,
        "best_val_f1": round(best.val_f1, 6) if best else None,
        "train_samples": len(train),
        "provenance": train.provenance.describe(),
    }


def _finish(checkpoint: Checkpoint, out_dir: Optional[Path]) -> Checkpoint:
    if out_dir is not None:
        save_checkpoint(checkpoint, out_dir)
    return checkpoint


@log_stage_execution
def pretrain_categorizer(
    train: DatasetSplit,
    valid: DatasetSplit,
    config: AppConfig,
    out_dir: Optional[Path] = None,
) -> Checkpoint:
    """
    Train the question categorizer on every training sample.

    Targets are the derived categories, so binary-answered questions of the
    original C1-C4 files are learned as Binary.
    """
    inputs = _prepare("categorizer", train, valid, config)
    model = CategorizerModel(len(inputs.vocab), config.model, inputs.embeddings)
    if inputs.training.freeze.embeddings:
        model.categorizer.encoder.embedding.weight.requires_grad_(False)

    train_set = QuestionImageDataset(train, inputs.vocab, config.data, load_images=False)
    valid_set = QuestionImageDataset(valid, inputs.vocab, config.data, load_images=False)
    loader = make_loader(
        train_set, inputs.training.batch_size, config.runtime.threads, shuffled_sampler(train_set, inputs.generator)
    )
    gold = [s.derived_category.value for s in valid]
    history = fit(
        model, loader, _validator(valid_set, gold, config, inputs.training.batch_size), inputs.training, _log_path(out_dir)
    )
    checkpoint = Checkpoint(
        arrays=arrays_from_module(model),
        stage="categorizer",
        fingerprint=fingerprint(inputs.training, config.model),
        model_config=model_settings(config.model, config.data.image_size, inputs.training.dropout),
        vocab=inputs.vocab,
        dictionaries=inputs.dictionaries,
        global_dictionary=inputs.global_dictionary,
        metadata=_metadata(history, train, len(valid) > 0),
    )
    return _finish(checkpoint, out_dir)


def fusion_pretraining_split(split: DatasetSplit) -> DatasetSplit:
    """The samples Input Fusion is pretrained on: C1, C2, C3 and Binary."""
    return split.filter(FUSION_PRETRAINING_CATEGORIES)


@log_stage_execution
def pretrain_input_fusion(
    train: DatasetSplit,
    valid: DatasetSplit,
    config: AppConfig,
    out_dir: Optional[Path] = None,
) -> Checkpoint:
    """
    Pretrain the encoders and Fusion I/II with a temporary single-dictionary head.

    C4 samples never reach the training stream. The temporary head is dropped:
    the checkpoint holds only the `fusion.` arrays, plus the vocabulary and the
    answer dictionaries of the full training split.
    """
    inputs = _prepare("input_fusion", train, valid, config)
    fusion_train, fusion_valid = fusion_pretraining_split(train), fusion_pretraining_split(valid)
    if len(fusion_train) == 0:
        raise DatasetError("Input Fusion pretraining needs C1, C2, C3 or Binary training samples")
    temporary = build_global_dictionary(fusion_train)
    fusion_dictionaries = build_answer_dictionaries(fusion_train)
    logger.info(
        f"Input Fusion pretraining on {len(fusion_train)} of {len(train)} training samples, "
        f"temporary head over {len(temporary)} answers"
    )

    model = IF1CModel(
        len(inputs.vocab), temporary, config.model, config.data.image_size,
        inputs.training.dropout, inputs.embeddings,
    )
    apply_freeze(model, inputs.training.freeze.embeddings, inputs.training.freeze.backbone)

    train_set = QuestionImageDataset(fusion_train, inputs.vocab, config.data, fusion_dictionaries, temporary)
    valid_set = QuestionImageDataset(fusion_valid, inputs.vocab, config.data)
    loader = _answer_loader(fusion_train, train_set, config, inputs, fusion_dictionaries)
    gold = [s.answer for s in fusion_valid]
    history = fit(
        model, loader, _validator(valid_set, gold, config, inputs.training.batch_size), inputs.training, _log_path(out_dir)
    )
    checkpoint = Checkpoint(
        arrays=arrays_from_module(model.fusion, prefix="fusion"),
        stage="input_fusion",
        fingerprint=fingerprint(inputs.training, config.model),
        model_config=model_settings(config.model, config.data.image_size, inputs.training.dropout),
        vocab=inputs.vocab,
        dictionaries=inputs.dictionaries,
        global_dictionary=inputs.global_dictionary,
        metadata=_metadata(history, fusion_train, len(fusion_valid) > 0),
    )
    return _finish(checkpoint, out_dir)


def require_pretrained(stage: str, pretrained: Mapping[str, Checkpoint]) -> None:
    for name in PRETRAINED_REQUIREMENTS[stage]:
        checkpoint = pretrained.get(name)
        if checkpoint is None:
            raise StageError(f"Stage '{stage}' needs the pretrained {name} checkpoint")
        if checkpoint.stage != name:
            raise StageError(f"Expected a {name} checkpoint for stage '{stage}', got a {checkpoint.stage} checkpoint")
        if checkpoint.vocab is None:
            raise StageError(f"The {name} checkpoint has no vocabulary")


@log_stage_execution
def train_model(
    train: DatasetSplit,
    valid: DatasetSplit,
    config: AppConfig,
    pretrained: Mapping[str, Checkpoint],
    stage: Optional[str] = None,
    out_dir: Optional[Path] = None,
) -> Checkpoint:
    """
    Train the IF-1C baseline or the SFN on top of the pretrained stages.

    sfn needs the categorizer and input_fusion checkpoints, if1c only the
    latter. The vocabulary comes from the input_fusion checkpoint; the answer
    dictionaries are rebuilt from `train`.

    Raises:
        StageError: for a missing, mismatched or incompatible pretrained checkpoint
    """
    stage = stage or config.training.stage
    if stage not in PRETRAINED_REQUIREMENTS:
        raise StageError(f"train_model runs stage if1c or sfn, got {stage!r}")
    require_pretrained(stage, pretrained)
    fusion_ckpt = pretrained["input_fusion"]
    image_size = config.data.image_size
    check_compatible("input_fusion", fusion_ckpt.model_config, config.model, image_size, FUSION_KEYS)
    if stage == "sfn":
        categorizer_ckpt = pretrained["categorizer"]
        check_compatible("categorizer", categorizer_ckpt.model_config, config.model, image_size, CATEGORIZER_KEYS)
        if categorizer_ckpt.vocab != fusion_ckpt.vocab:
            raise StageError("The categorizer and input_fusion checkpoints were built with different vocabularies")

    inputs = _prepare(stage, train, valid, config, vocab=fusion_ckpt.vocab, with_embeddings=False)
    dropout = inputs.training.dropout
    if stage == "sfn":
        model = SFNModel(len(inputs.vocab), inputs.dictionaries, config.model, image_size, dropout, load_asset=False)
        load_arrays_into(model.categorizer, categorizer_ckpt.subset("categorizer"))
        model.freeze_categorizer()
    else:
        model = IF1CModel(
            len(inputs.vocab), inputs.global_dictionary, config.model, image_size, dropout,
            dictionaries=inputs.dictionaries, load_asset=False,
        )
    load_arrays_into(model.fusion, fusion_ckpt.subset("fusion"))
    apply_freeze(model, inputs.training.freeze.embeddings, inputs.training.freeze.backbone)

    train_set = QuestionImageDataset(train, inputs.vocab, config.data, inputs.dictionaries, inputs.global_dictionary)
    valid_set = QuestionImageDataset(valid, inputs.vocab, config.data)
    loader = _answer_loader(train, train_set, config, inputs, inputs.dictionaries)
    gold = [s.answer for s in valid]
    history = fit(
        model, loader, _validator(valid_set, gold, config, inputs.training.batch_size), inputs.training, _log_path(out_dir)
    )
    checkpoint = Checkpoint(
        arrays=arrays_from_module(model),
        stage=stage,
        fingerprint=fingerprint(inputs.training, config.model),
        model_config=model_settings(config.model, image_size, dropout),
        vocab=inputs.vocab,
        dictionaries=inputs.dictionaries,
        global_dictionary=inputs.global_dictionary,
        metadata=_metadata(history, train, len(valid) > 0),
    )
    return _finish(checkpoint, out_dir)
