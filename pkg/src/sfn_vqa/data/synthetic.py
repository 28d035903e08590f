"""
Seeded synthetic VQA-Med style dataset.

Every image encodes its labels visually:
- background texture    -> modality (canvas size also depends on the modality)
- marker bar direction  -> plane
- central silhouette    -> organ system
- small glyph           -> abnormality; the glyph alone is ambiguous, its meaning
                           depends on the organ it is drawn on

Question files are written in the VQA-Med layout read by load_dataset.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw

from sfn_vqa.config.config import SyntheticSpec
from sfn_vqa.config.loader import load_synthetic_labels, templates_of_kind
from sfn_vqa.core.exceptions import ConfigError, SFNError
from sfn_vqa.core.logging import get_logger
from sfn_vqa.data.types import ORIGINAL_CATEGORIES, CategoryLabel

logger = get_logger(__name__)

SPLITS = ("train", "valid", "test")
GLYPHS = ("ring", "cross", "dot")

# 24 images cycle the 12 abnormalities twice, 2 normal images answer "none",
# then 2 yes and 2 no binary answers
SEED_BLOCK_OPEN = 24
SEED_BLOCK_NORMAL = 2
SEED_BLOCK_BINARY = ("yes", "yes", "no", "no")
SEED_BLOCK = SEED_BLOCK_OPEN + SEED_BLOCK_NORMAL + len(SEED_BLOCK_BINARY)
NO_FINDING = "none"

CHOICE_SHARE = 0.25
REFERENCE_SIZE = 224.0


@dataclass(frozen=True)
class Modality:
    label: str
    width: int
    height: int
    jitter: bool


@dataclass(frozen=True)
class Abnormality:
    label: str
    organ: int
    glyph: str


@dataclass(frozen=True)
class LabelInventory:
    modalities: Tuple[Modality, ...]
    planes: Tuple[Tuple[str, str], ...]
    organs: Tuple[Tuple[str, str], ...]
    abnormalities: Tuple[Abnormality, ...]

    def abnormalities_of(self, organ: int) -> List[Abnormality]:
        return [a for a in self.abnormalities if a.organ == organ]


def load_inventory() -> LabelInventory:
    raw = load_synthetic_labels()
    modalities = []
    for label, detail in raw["modality"]:
        jitter = detail.endswith("~")
        try:
            width, height = (int(part) for part in detail.rstrip("~").split("x"))
        except ValueError as e:
            raise ConfigError(f"Modality '{label}' has an invalid canvas size '{detail}'") from e
        modalities.append(Modality(label, width, height, jitter))
    if len(modalities) > len(TEXTURES):
        raise ConfigError(f"At most {len(TEXTURES)} modalities can be rendered, got {len(modalities)}")

    organs = raw["organ"]
    organ_index = {label: i for i, (label, _) in enumerate(organs)}
    abnormalities = []
    for label, detail in raw["abnormality"]:
        organ, _, glyph = detail.rpartition(":")
        if organ not in organ_index or glyph not in GLYPHS:
            raise ConfigError(f"Abnormality '{label}' has an invalid detail '{detail}'")
        abnormalities.append(Abnormality(label, organ_index[organ], glyph))
    return LabelInventory(tuple(modalities), raw["plane"], organs, tuple(abnormalities))


def zipf_probabilities(n_classes: int, exponent: float) -> np.ndarray:
    """p_k proportional to (k+1)^-exponent; exponent 0 is uniform."""
    weights = np.arange(1, n_classes + 1, dtype=np.float64) ** -exponent
    return weights / weights.sum()


@dataclass(frozen=True)
class ImageLabels:
    modality: int
    plane: int
    organ: int
    abnormality: Optional[Abnormality]
    ambiguous: bool
    width: int
    height: int
    glyph_offset: Tuple[float, float]


@dataclass(frozen=True)
class QuestionRecord:
    category: CategoryLabel
    question: str
    answer: str


# ============================================================================
# LABEL AND QUESTION SAMPLING
# ============================================================================

def _canvas_size(rng: np.random.Generator, modality: Modality, spec: SyntheticSpec) -> Tuple[int, int]:
    if not modality.jitter or spec.size_jitter == 0:
        return modality.width, modality.height
    dw, dh = rng.integers(-spec.size_jitter, spec.size_jitter + 1, size=2)
    return modality.width + int(dw), modality.height + int(dh)


def draw_image_labels(
    rng: np.random.Generator,
    inventory: LabelInventory,
    spec: SyntheticSpec,
    abnormality: Optional[Abnormality] = None,
    force_abnormal: Optional[bool] = None,
) -> ImageLabels:
    """Sample the labels of one image; `abnormality` pins the finding (and its organ)."""
    modality = int(rng.choice(len(inventory.modalities), p=zipf_probabilities(len(inventory.modalities), spec.imbalance)))
    plane = int(rng.choice(len(inventory.planes), p=zipf_probabilities(len(inventory.planes), spec.imbalance)))
    organ = int(rng.choice(len(inventory.organs), p=zipf_probabilities(len(inventory.organs), spec.imbalance)))
    abnormal = rng.random() < spec.abnormal_fraction if force_abnormal is None else force_abnormal
    if abnormality is not None:
        organ = abnormality.organ
    elif abnormal:
        candidates = inventory.abnormalities_of(organ)
        abnormality = candidates[int(rng.choice(len(candidates), p=zipf_probabilities(len(candidates), spec.imbalance)))]
    ambiguous = abnormality is not None and rng.random() < spec.ambiguous_fraction
    width, height = _canvas_size(rng, inventory.modalities[modality], spec)
    offset = tuple(float(x) for x in rng.uniform(-0.1, 0.1, size=2))
    return ImageLabels(modality, plane, organ, abnormality, ambiguous, width, height, offset)


def _pick(rng: np.random.Generator, options: Sequence[str]) -> str:
    if not options:
        raise ConfigError("A question template list is empty")
    return options[int(rng.integers(len(options)))]


def _modality_question(
    rng: np.random.Generator, labels: ImageLabels, inventory: LabelInventory, spec: SyntheticSpec, open_only: bool
) -> QuestionRecord:
    truth = inventory.modalities[labels.modality].label
    others = [m.label for i, m in enumerate(inventory.modalities) if i != labels.modality]
    draw = 1.0 if open_only else rng.random()
    if draw < spec.binary_fraction:
        mentioned = truth if rng.random() < 0.5 else _pick(rng, others)
        question = _pick(rng, templates_of_kind("C1", "binary")).format(modality=mentioned)
        return QuestionRecord(CategoryLabel.MODALITY, question, "yes" if mentioned == truth else "no")
    if draw < spec.binary_fraction + (1.0 - spec.binary_fraction) * CHOICE_SHARE:
        options = [truth, _pick(rng, others)]
        if rng.random() < 0.5:
            options.reverse()
        question = _pick(rng, templates_of_kind("C1", "choice")).format(option_a=options[0], option_b=options[1])
        return QuestionRecord(CategoryLabel.MODALITY, question, truth)
    return QuestionRecord(CategoryLabel.MODALITY, _pick(rng, templates_of_kind("C1", "open")), truth)


def _abnormality_question(
    rng: np.random.Generator, labels: ImageLabels, spec: SyntheticSpec, kind: Optional[str] = None
) -> QuestionRecord:
    if kind is None:
        kind = "open" if rng.random() >= spec.binary_fraction else "binary"
    if kind == "open":
        answer = labels.abnormality.label if labels.abnormality is not None else NO_FINDING
        return QuestionRecord(CategoryLabel.ABNORMALITY, _pick(rng, templates_of_kind("C4", "open")), answer)
    answer = "yes" if labels.abnormality is not None else "no"
    return QuestionRecord(CategoryLabel.ABNORMALITY, _pick(rng, templates_of_kind("C4", "binary")), answer)


def ask_questions(
    rng: np.random.Generator,
    labels: ImageLabels,
    inventory: LabelInventory,
    spec: SyntheticSpec,
    categories: Sequence[CategoryLabel],
    c4_kind: Optional[str] = None,
    open_only: bool = False,
) -> List[QuestionRecord]:
    records = []
    for category in categories:
        if category is CategoryLabel.MODALITY:
            records.append(_modality_question(rng, labels, inventory, spec, open_only))
        elif category is CategoryLabel.PLANE:
            records.append(QuestionRecord(category, _pick(rng, templates_of_kind("C2", "open")), inventory.planes[labels.plane][0]))
        elif category is CategoryLabel.ORGAN:
            records.append(QuestionRecord(category, _pick(rng, templates_of_kind("C3", "open")), inventory.organs[labels.organ][0]))
        else:
            records.append(_abnormality_question(rng, labels, spec, c4_kind))
    return records


def _question_categories(rng: np.random.Generator, spec: SyntheticSpec) -> List[CategoryLabel]:
    if spec.questions_per_image >= len(ORIGINAL_CATEGORIES):
        return list(ORIGINAL_CATEGORIES)
    chosen = sorted(int(i) for i in rng.choice(len(ORIGINAL_CATEGORIES), size=spec.questions_per_image, replace=False))
    return [ORIGINAL_CATEGORIES[i] for i in chosen]


# ============================================================================
# RENDERING
# ============================================================================

def _stripes(u, v):
    return 50 + 40 * (np.sin(2 * np.pi * 10 * v) > 0)


def _gradient_x(u, v):
    return 30 + 60 * u


def _gradient_y(u, v):
    return 110 + 60 * v


def _checker(u, v):
    return 60 + 50 * ((np.floor(u * 8) + np.floor(v * 8)) % 2)


def _rings(u, v):
    radius = np.sqrt((u - 0.5) ** 2 + (v - 0.5) ** 2)
    return 40 + 50 * (np.sin(2 * np.pi * 12 * radius) > 0)


TEXTURES = (_stripes, _gradient_x, _gradient_y, _checker, _rings)

SILHOUETTE_FILL = 170
GLYPH_FILL = 250
AMBIGUOUS_GLYPH_FILL = 190
MARKER_FILL = 255


def render_image(labels: ImageLabels, inventory: LabelInventory, spec: SyntheticSpec) -> Image.Image:
    w, h = labels.width, labels.height
    u, v = np.meshgrid((np.arange(w) + 0.5) / w, (np.arange(h) + 0.5) / h)
    canvas = TEXTURES[labels.modality](u, v)
    img = Image.fromarray(np.clip(canvas, 0, 255).astype(np.uint8))
    draw = ImageDraw.Draw(img)
    sx, sy = w / REFERENCE_SIZE, h / REFERENCE_SIZE
    stroke = max(1, round(3 * max(sx, sy)))

    # plane marker in the top-left corner
    x0, x1, y0, y1 = 0.05 * w, 0.22 * w, 0.05 * h, 0.22 * h
    orientation = inventory.planes[labels.plane][1]
    if orientation == "horizontal":
        segment = [(x0, (y0 + y1) / 2), (x1, (y0 + y1) / 2)]
    elif orientation == "vertical":
        segment = [((x0 + x1) / 2, y0), ((x0 + x1) / 2, y1)]
    else:
        segment = [(x0, y1), (x1, y0)]
    draw.line(segment, fill=MARKER_FILL, width=stroke)

    # organ silhouette
    cx, cy, a, b = 0.55 * w, 0.55 * h, 0.3 * w, 0.3 * h
    shape = inventory.organs[labels.organ][1]
    if shape == "ellipse":
        draw.ellipse([cx - a, cy - b, cx + a, cy + b], fill=SILHOUETTE_FILL)
    elif shape == "rectangle":
        draw.rectangle([cx - a, cy - b, cx + a, cy + b], fill=SILHOUETTE_FILL)
    elif shape == "triangle":
        draw.polygon([(cx, cy - b), (cx + a, cy + b), (cx - a, cy + b)], fill=SILHOUETTE_FILL)
    else:
        draw.polygon([(cx, cy - b), (cx + a, cy), (cx, cy + b), (cx - a, cy)], fill=SILHOUETTE_FILL)

    if labels.abnormality is not None:
        fill = AMBIGUOUS_GLYPH_FILL if labels.ambiguous else GLYPH_FILL
        gx, gy = cx + labels.glyph_offset[0] * w, cy + 0.3 * b + labels.glyph_offset[1] * h * 0.5
        rx, ry = spec.glyph_size / 2 * sx, spec.glyph_size / 2 * sy
        thin = max(1, round(2 * max(sx, sy)))
        if labels.abnormality.glyph == "ring":
            draw.ellipse([gx - rx, gy - ry, gx + rx, gy + ry], outline=fill, width=thin)
        elif labels.abnormality.glyph == "cross":
            draw.line([(gx - rx, gy), (gx + rx, gy)], fill=fill, width=thin)
            draw.line([(gx, gy - ry), (gx, gy + ry)], fill=fill, width=thin)
        else:
            draw.ellipse([gx - 0.6 * rx, gy - 0.6 * ry, gx + 0.6 * rx, gy + 0.6 * ry], fill=fill)
    return img


# ============================================================================
# GENERATION
# ============================================================================

def _split_sizes(spec: SyntheticSpec) -> Dict[str, int]:
    n_valid = int(round(spec.n_images * spec.valid_fraction))
    return {"train": spec.n_images - n_valid, "valid": n_valid, "test": spec.test_images}


def generate_synthetic(spec: SyntheticSpec, out_dir) -> Dict[str, Dict[str, int]]:
    """
    Render the dataset into out_dir/<split>/ and return per-split counts.

    Output is byte-identical for identical specs. The first training images form
    a seeding block that makes every answer class occur at least twice in the
    training split; the configured rare tail adds classes that occur once.
    """
    out_dir = Path(out_dir)
    inventory = load_inventory()
    sizes = _split_sizes(spec)
    required = SEED_BLOCK + spec.rare_tail
    if sizes["train"] < required:
        raise ConfigError(
            f"synthetic.n_images leaves {sizes['train']} training images; at least {required} are needed"
        )
    if len(inventory.abnormalities) * 2 > SEED_BLOCK_OPEN:
        raise ConfigError(f"The seeding block covers at most {SEED_BLOCK_OPEN // 2} abnormalities")

    rng = np.random.Generator(np.random.PCG64(spec.seed))
    lines: Dict[str, Dict[CategoryLabel, List[str]]] = {s: {c: [] for c in ORIGINAL_CATEGORIES} for s in SPLITS}
    counts = {s: {"images": 0, "questions": 0} for s in SPLITS}

    try:
        for split in SPLITS:
            (out_dir / split / "images").mkdir(parents=True, exist_ok=True)

        index = 0
        for split in SPLITS:
            for position in range(sizes[split]):
                c4_kind, open_only = None, False
                categories: Sequence[CategoryLabel]
                if split == "train" and position < SEED_BLOCK_OPEN:
                    pinned = inventory.abnormalities[position % len(inventory.abnormalities)]
                    labels = draw_image_labels(rng, inventory, spec, abnormality=pinned, force_abnormal=True)
                    labels = _with_seed_attributes(labels, position, inventory)
                    categories, c4_kind, open_only = ORIGINAL_CATEGORIES, "open", True
                elif split == "train" and position < SEED_BLOCK_OPEN + SEED_BLOCK_NORMAL:
                    labels = draw_image_labels(rng, inventory, spec, force_abnormal=False)
                    categories, c4_kind, open_only = ORIGINAL_CATEGORIES, "open", True
                elif split == "train" and position < SEED_BLOCK:
                    answer = SEED_BLOCK_BINARY[position - SEED_BLOCK_OPEN - SEED_BLOCK_NORMAL]
                    labels = draw_image_labels(rng, inventory, spec, force_abnormal=answer == "yes")
                    categories, c4_kind, open_only = ORIGINAL_CATEGORIES, "binary", True
                elif split == "train" and position < required:
                    k = position - SEED_BLOCK
                    rare = Abnormality(f"rare finding {k + 1}", int(rng.integers(len(inventory.organs))), GLYPHS[k % len(GLYPHS)])
                    labels = draw_image_labels(rng, inventory, spec, abnormality=rare, force_abnormal=True)
                    categories, c4_kind = _question_categories(rng, spec), "open"
                    if CategoryLabel.ABNORMALITY not in categories:
                        categories = list(categories) + [CategoryLabel.ABNORMALITY]
                else:
                    labels = draw_image_labels(rng, inventory, spec)
                    categories = _question_categories(rng, spec)

                records = ask_questions(rng, labels, inventory, spec, categories, c4_kind, open_only)
                image_id = f"synth{index:05d}"
                render_image(labels, inventory, spec).save(out_dir / split / "images" / f"{image_id}.png", format="PNG")
                for record in records:
                    line = f"{image_id}|{record.question}" if split == "test" else f"{image_id}|{record.question}|{record.answer}"
                    lines[split][record.category].append(line)
                counts[split]["images"] += 1
                counts[split]["questions"] += len(records)
                index += 1

        for split in SPLITS:
            for category in ORIGINAL_CATEGORIES:
                target = out_dir / split / f"{category.value}_{split}.txt"
                content = "".join(f"{line}\n" for line in lines[split][category])
                target.write_text(content, encoding="utf-8")
    except OSError as e:
        raise SFNError(f"Cannot write synthetic dataset to {out_dir}: {e}") from e

    logger.info(
        "Synthetic dataset written to %s: %s",
        out_dir,
        ", ".join(f"{s} {counts[s]['images']} images/{counts[s]['questions']} questions" for s in SPLITS),
    )
    return counts


def _with_seed_attributes(labels: ImageLabels, position: int, inventory: LabelInventory) -> ImageLabels:
    """Cycle modality and plane through the seeding block so each label occurs repeatedly."""
    modality = position % len(inventory.modalities)
    base = inventory.modalities[modality]
    return ImageLabels(
        modality=modality,
        plane=position % len(inventory.planes),
        organ=labels.organ,
        abnormality=labels.abnormality,
        ambiguous=False,
        width=base.width,
        height=base.height,
        glyph_offset=labels.glyph_offset,
    )
