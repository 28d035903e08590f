"""
Merge, shuffle and re-split the training and validation data.

Shuffling is a Fisher-Yates pass driven by numpy's PCG64 generator seeded with
the 64-bit resample seed: for i = N-1 .. 1 swap position i with
j = rng.integers(0, i + 1). The first floor(N * v / (t + v)) samples of the
shuffled sequence become the new validation split.
"""

import os
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from sfn_vqa.config.loader import write_data_layout
from sfn_vqa.core.exceptions import DatasetError, SFNError
from sfn_vqa.core.logging import get_logger
from sfn_vqa.data.types import ORIGINAL_CATEGORIES, DatasetSplit, Provenance, Sample

logger = get_logger(__name__)

SEED_MASK = (1 << 64) - 1


def shuffle_indices(n: int, seed: int) -> List[int]:
    rng = np.random.Generator(np.random.PCG64(seed & SEED_MASK))
    order = list(range(n))
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        order[i], order[j] = order[j], order[i]
    return order


def validation_size(n: int, ratio: Tuple[int, int]) -> int:
    return n * ratio[1] // (ratio[0] + ratio[1])


def _split_group(samples: Sequence[Sample], ratio: Tuple[int, int], seed: int) -> Tuple[List[Sample], List[Sample]]:
    order = shuffle_indices(len(samples), seed)
    n_valid = validation_size(len(samples), ratio)
    shuffled = [samples[i] for i in order]
    return shuffled[n_valid:], shuffled[:n_valid]


def resample_split(
    train: DatasetSplit,
    valid: DatasetSplit,
    ratio: Tuple[int, int] = (19, 1),
    seed: int = 0,
    stratified: bool = False,
) -> Tuple[DatasetSplit, DatasetSplit]:
    """
    Concatenate train + valid and split them again in proportions ratio[0]:ratio[1].

    With `stratified` each derived category is shuffled and split on its own
    (using the same seed), then the per-category parts are concatenated in the
    fixed category order.

    Raises:
        DatasetError: when the merged data has fewer than sum(ratio) samples
    """
    merged = list(train.samples) + list(valid.samples)
    total = ratio[0] + ratio[1]
    if len(merged) < total:
        raise DatasetError(
            f"Cannot resample {len(merged)} samples in proportions {ratio[0]}:{ratio[1]}; need at least {total}"
        )

    if stratified:
        new_train: List[Sample] = []
        new_valid: List[Sample] = []
        groups: Dict = {}
        for sample in merged:
            groups.setdefault(sample.derived_category, []).append(sample)
        for category in sorted(groups, key=lambda c: c.index):
            part_train, part_valid = _split_group(groups[category], ratio, seed)
            new_train += part_train
            new_valid += part_valid
    else:
        new_train, new_valid = _split_group(merged, ratio, seed)

    sources = train.provenance.source_files + valid.provenance.source_files
    provenance = Provenance(source_files=sources, seed=seed, ratio=tuple(ratio), stratified=stratified)
    logger.info(
        f"Resampled {len(merged)} samples (seed {seed}, {ratio[0]}:{ratio[1]}"
        f"{', stratified' if stratified else ''}): train {len(new_train)}, valid {len(new_valid)}"
    )
    return (
        DatasetSplit(samples=tuple(new_train), provenance=provenance),
        DatasetSplit(samples=tuple(new_valid), provenance=provenance),
    )


def write_resampled(splits: Dict[str, DatasetSplit], out_dir, extra_layout: Optional[Dict[str, Dict]] = None) -> Path:
    """
    Write the splits in the question-file layout plus a data.yaml.

    Images are not copied: the data.yaml lists the directories the samples'
    images live in, relative to out_dir. `extra_layout` entries (such as an untouched test
    split) are copied into the data.yaml as given.
    """
    out_dir = Path(out_dir)
    layout = dict(extra_layout or {})
    try:
        for name, split in splits.items():
            split_dir = out_dir / name
            split_dir.mkdir(parents=True, exist_ok=True)
            image_dirs: Dict[str, None] = {}
            for category in ORIGINAL_CATEGORIES:
                lines = []
                for sample in split:
                    if sample.original_category is not category:
                        continue
                    image_dirs.setdefault(os.path.relpath(sample.image_path.parent, out_dir), None)
                    lines.append(
                        f"{sample.image_id}|{sample.question}"
                        if sample.answer is None
                        else f"{sample.image_id}|{sample.question}|{sample.answer}"
                    )
                content = "".join(f"{line}\n" for line in lines)
                (split_dir / f"{category.value}_{name}.txt").write_text(content, encoding="utf-8")
            layout[name] = {"questions": f"{name}/C?_{name}.txt", "images": sorted(image_dirs)}
        write_data_layout(out_dir, layout)
    except OSError as e:
        raise SFNError(f"Cannot write resampled dataset to {out_dir}: {e}") from e
    return out_dir
