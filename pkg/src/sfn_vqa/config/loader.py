"""
Resource Loader for the SFN pipeline

Loads the text resources that drive the synthetic dataset generator and the
optional per-dataset layout file. Text resources are pipe-delimited, one entry
per line, with '#' comments.

Resource Files:
- config/templates/C?.txt: question templates per original category (kind|template)
- config/mappings/synthetic_labels.txt: label inventory (attribute|label|detail)
- <data>/data.yaml: optional dataset layout overriding the `data.splits` section
"""

import logging
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from sfn_vqa.core.exceptions import ConfigError

logger = logging.getLogger(__name__)

# Configuration directories
CONFIG_DIR = Path(__file__).parent
TEMPLATES_DIR = CONFIG_DIR / "templates"
MAPPINGS_DIR = CONFIG_DIR / "mappings"

DATA_LAYOUT_FILE = "data.yaml"

TEMPLATE_KINDS = ("open", "choice", "binary")
LABEL_ATTRIBUTES = ("modality", "plane", "organ", "abnormality")


def _content_lines(path: Path):
    """Yield (line_number, stripped line) for non-empty, non-comment lines."""
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            yield number, line


# ============================================================================
# QUESTION TEMPLATES
# ============================================================================

@lru_cache(maxsize=8)
def load_question_templates(category: str) -> Tuple[Dict[str, str], ...]:
    """
    Load the question templates of one original category.

    Args:
        category: "C1".."C4"

    Returns:
        Tuple of dicts: ({"kind": "open", "template": "what plane is this?"}, ...)

    Raises:
        ConfigError: If the template file is missing or a line is malformed
    """
    template_file = TEMPLATES_DIR / f"{category}.txt"

    if not template_file.exists():
        raise ConfigError(f"No question templates for category: {category}")

    templates = []
    for number, line in _content_lines(template_file):
        parts = line.split("|", 1)
        if len(parts) != 2 or parts[0].strip() not in TEMPLATE_KINDS:
            raise ConfigError(
                f"{template_file.name}:{number}: expected 'kind|template' with kind in {TEMPLATE_KINDS}"
            )
        templates.append({"kind": parts[0].strip(), "template": parts[1].strip()})

    return tuple(templates)


def templates_of_kind(category: str, kind: str) -> List[str]:
    """Return the template strings of one kind for a category."""
    return [t["template"] for t in load_question_templates(category) if t["kind"] == kind]


# ============================================================================
# SYNTHETIC LABEL INVENTORY
# ============================================================================

@lru_cache(maxsize=1)
def load_synthetic_labels() -> Dict[str, Tuple[Tuple[str, str], ...]]:
    """
    Load the label inventory of the synthetic generator.

    Format: attribute|label|detail

    Returns:
        Dict mapping attribute name to a tuple of (label, detail) pairs in file order
    """
    labels_file = MAPPINGS_DIR / "synthetic_labels.txt"
    if not labels_file.exists():
        raise ConfigError(f"Synthetic label file not found: {labels_file}")

    inventory: Dict[str, List[Tuple[str, str]]] = {name: [] for name in LABEL_ATTRIBUTES}
    for number, line in _content_lines(labels_file):
        parts = line.split("|")
        if len(parts) != 3 or parts[0].strip() not in inventory:
            raise ConfigError(
                f"{labels_file.name}:{number}: expected 'attribute|label|detail' with attribute in {LABEL_ATTRIBUTES}"
            )
        inventory[parts[0].strip()].append((parts[1].strip(), parts[2].strip()))

    return {name: tuple(entries) for name, entries in inventory.items()}


# ============================================================================
# DATASET LAYOUT
# ============================================================================

def load_data_layout(data_root: Path) -> Optional[Dict[str, Any]]:
    """
    Read <data_root>/data.yaml if present.

    Returns:
        The `splits` mapping of the file, or None when the dataset has no layout file
    """
    layout_file = Path(data_root) / DATA_LAYOUT_FILE
    if not layout_file.exists():
        return None
    try:
        with open(layout_file, "r", encoding="utf-8") as f:
            content = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{layout_file} is not valid YAML: {e}") from e
    splits = content.get("splits")
    if not isinstance(splits, dict):
        raise ConfigError(f"{layout_file} must define a 'splits' mapping")
    return splits


def write_data_layout(data_root: Path, splits: Dict[str, Any]) -> Path:
    """Write a data.yaml describing the given split layout."""
    layout_file = Path(data_root) / DATA_LAYOUT_FILE
    layout_file.parent.mkdir(parents=True, exist_ok=True)
    with open(layout_file, "w", encoding="utf-8") as f:
        yaml.safe_dump({"splits": splits}, f, sort_keys=True, default_flow_style=False)
    return layout_file


# ============================================================================
# CACHE MANAGEMENT
# ============================================================================

def clear_cache():
    """
    Clear all cached resource data.

    Call this if resource files change during runtime.
    """
    load_question_templates.cache_clear()
    load_synthetic_labels.cache_clear()
    logger.info("Resource cache cleared")


# ============================================================================
# VALIDATION FUNCTIONS
# ============================================================================

def validate_all_configs() -> Dict[str, List[str]]:
    """
    Validate all resource files.

    Returns:
        Dict mapping resource names to list of errors
    """
    results: Dict[str, List[str]] = {}

    for category in ("C1", "C2", "C3", "C4"):
        try:
            templates = load_question_templates(category)
            if not any(t["kind"] == "open" for t in templates):
                results[f"templates:{category}"] = ["No open templates defined"]
        except ConfigError as e:
            results[f"templates:{category}"] = [str(e)]

    try:
        inventory = load_synthetic_labels()
        errors = [f"No labels for attribute '{name}'" for name, entries in inventory.items() if not entries]
        organs = {label for label, _ in inventory.get("organ", ())}
        for label, detail in inventory.get("abnormality", ()):
            organ, _, glyph = detail.rpartition(":")
            if organ not in organs or not glyph:
                errors.append(f"Abnormality '{label}' has invalid detail '{detail}'")
        if errors:
            results["synthetic_labels.txt"] = errors
    except ConfigError as e:
        results["synthetic_labels.txt"] = [str(e)]

    return results
