"""
Dataset parsing.

Question files follow the VQA-Med distribution: one UTF-8 file per original
category named <Category>_<split>.txt, each line `image_id|question|answer`
(test files: `image_id|question`). The answer is everything after the second
pipe, verbatim. Images live in one of the split's image directories as
<image_id>.jpg or <image_id>.png.
"""

import glob
import re
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from PIL import Image

from sfn_vqa.config.config import AppConfig
from sfn_vqa.config.loader import load_data_layout
from sfn_vqa.core.exceptions import DatasetError
from sfn_vqa.core.logging import get_logger
from sfn_vqa.data.text import BINARY_ANSWERS, normalize_answer, preprocess_question
from sfn_vqa.data.types import (
    ORIGINAL_CATEGORIES,
    CategoryLabel,
    DatasetSplit,
    Provenance,
    Sample,
)

logger = get_logger(__name__)

IMAGE_EXTENSIONS = (".jpg", ".png")
_CATEGORY_FILE_RE = re.compile(r"^(C[1-4])(?=[_.]|$)")

PathLike = Union[str, Path]


def derive_category(original: CategoryLabel, answer: str) -> CategoryLabel:
    """Binary iff the normalized answer is 'yes' or 'no', else the original category."""
    if original not in ORIGINAL_CATEGORIES:
        raise DatasetError(f"Original category must be one of C1..C4, got {original.value}")
    normalized = normalize_answer(answer)
    if not normalized:
        raise DatasetError("Cannot derive a category from an empty answer")
    return CategoryLabel.BINARY if normalized in BINARY_ANSWERS else original


def category_from_file_name(path: PathLike) -> CategoryLabel:
    match = _CATEGORY_FILE_RE.match(Path(path).name)
    if match is None:
        raise DatasetError(f"Cannot infer the question category from file name: {Path(path).name}")
    return CategoryLabel(match.group(1))


class _ImageIndex:
    """Resolves image ids to paths and caches their original on-disk dimensions."""

    def __init__(self, image_dirs: Sequence[Path]):
        self.image_dirs = [Path(d) for d in image_dirs]
        self._cache: Dict[str, Tuple[Path, int, int]] = {}

    def lookup(self, image_id: str) -> Tuple[Path, int, int]:
        if image_id not in self._cache:
            for directory in self.image_dirs:
                for extension in IMAGE_EXTENSIONS:
                    candidate = directory / f"{image_id}{extension}"
                    if candidate.exists():
                        with Image.open(candidate) as img:
                            width, height = img.size
                        self._cache[image_id] = (candidate, width, height)
                        break
                if image_id in self._cache:
                    break
            else:
                raise DatasetError(
                    f"Image file for image_id '{image_id}' not found in "
                    f"{', '.join(str(d) for d in self.image_dirs)}"
                )
        return self._cache[image_id]


def _parse_file(path: Path, images: _ImageIndex) -> List[Sample]:
    category = category_from_file_name(path)
    samples = []
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
    except UnicodeDecodeError as e:
        raise DatasetError(f"{path}: not valid UTF-8 ({e})") from e
    except OSError as e:
        raise DatasetError(f"{path}: cannot read question file ({e})") from e

    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split("|", 2)
        if len(parts) < 2 or not parts[0].strip() or not parts[1].strip():
            raise DatasetError(f"{path}:{number}: malformed line, expected image_id|question|answer")
        image_id, question = parts[0].strip(), parts[1]
        answer: Optional[str] = parts[2] if len(parts) == 3 else None
        try:
            derived = category if answer is None else derive_category(category, answer)
        except DatasetError as e:
            raise DatasetError(f"{path}:{number}: {e}") from e
        image_path, width, height = images.lookup(image_id)
        samples.append(
            Sample(
                image_id=image_id,
                image_path=image_path,
                original_category=category,
                derived_category=derived,
                question=question,
                tokens=tuple(preprocess_question(question)),
                answer=answer,
                image_width=width,
                image_height=height,
                category_known=answer is not None,
            )
        )
    return samples


def load_dataset(
    question_files: Sequence[PathLike],
    image_dir: Union[PathLike, Sequence[PathLike]],
    threads: int = 1,
) -> DatasetSplit:
    """
    Parse question files into a DatasetSplit, one Sample per non-empty line.

    `image_dir` may be a single directory or a list searched in order (resampled
    splits reference images of both original splits). Files are parsed
    concurrently when threads > 1; sample order always follows `question_files`.
    """
    files = [Path(f) for f in question_files]
    for path in files:
        if not path.exists():
            raise DatasetError(f"Question file not found: {path}")
    image_dirs = [image_dir] if isinstance(image_dir, (str, Path)) else list(image_dir)
    images = _ImageIndex([Path(d) for d in image_dirs])

    if threads > 1 and len(files) > 1:
        # each worker gets its own index so the caches are never shared
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parsed = list(pool.map(lambda p: _parse_file(p, _ImageIndex(images.image_dirs)), files))
    else:
        parsed = [_parse_file(path, images) for path in files]

    samples = tuple(sample for chunk in parsed for sample in chunk)
    logger.info(f"Loaded {len(samples)} samples from {len(files)} question file(s)")
    return DatasetSplit(samples=samples, provenance=Provenance(source_files=tuple(str(p) for p in files)))


# ============================================================================
# SPLIT RESOLUTION
# ============================================================================

def split_layout(data_root: PathLike, config: AppConfig, split: str) -> Tuple[str, List[str]]:
    """
    Return the question-file glob and image directories of a split, relative to data_root.

    A data.yaml in data_root takes precedence over the `data.splits` section.
    """
    data_root = Path(data_root)
    layout = load_data_layout(data_root)
    if layout is not None and split in layout:
        entry = layout[split]
        pattern, image_dirs = entry.get("questions"), entry.get("images", [])
    elif split in config.data.splits:
        entry = config.data.splits[split]
        pattern, image_dirs = entry.questions, entry.images
    else:
        raise DatasetError(f"Split '{split}' is not defined for dataset {data_root}")
    if not pattern:
        raise DatasetError(f"Split '{split}' of {data_root} has no question file pattern")
    if isinstance(image_dirs, str):
        image_dirs = [image_dirs]
    return pattern, list(image_dirs)


def resolve_split(data_root: PathLike, config: AppConfig, split: str) -> Tuple[List[Path], List[Path]]:
    """Return (question files, image directories) of a split under data_root."""
    data_root = Path(data_root)
    pattern, image_dirs = split_layout(data_root, config, split)

    files = sorted(Path(p) for p in glob.glob(str(data_root / pattern)))
    if not files:
        raise DatasetError(f"No question files match '{pattern}' under {data_root}")
    return files, [data_root / d for d in image_dirs]


def load_split(data_root: PathLike, config: AppConfig, split: str) -> DatasetSplit:
    files, image_dirs = resolve_split(data_root, config, split)
    logger.info(f"Loading split '{split}' from {data_root}")
    return load_dataset(files, image_dirs, threads=config.runtime.threads)
