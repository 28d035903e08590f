"""
Configuration module for the SFN pipeline.

Defaults live in defaults.yaml next to this file. A user file and --set
overrides are deep-merged over them, selected environment variables are
applied, and the result is validated into the pydantic models below.
"""

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Optional, Tuple

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from sfn_vqa.core.exceptions import ConfigError

DEFAULTS_FILE = Path(__file__).parent / "defaults.yaml"

STAGES = ("categorizer", "input_fusion", "if1c", "sfn")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SplitLayout(_Section):
    questions: str
    images: List[str]


class DataConfig(_Section):
    splits: Dict[str, SplitLayout]
    image_size: int = Field(224, ge=8)
    image_mean: Tuple[float, float, float] = (0.485, 0.456, 0.406)
    image_std: Tuple[float, float, float] = (0.229, 0.224, 0.225)
    cache_images: bool = True


class SyntheticSpec(_Section):
    n_images: int = Field(2000, ge=1)
    questions_per_image: int = Field(4, ge=1, le=4)
    valid_fraction: float = Field(0.1, ge=0.0, lt=1.0)
    test_images: int = Field(100, ge=0)
    imbalance: float = Field(1.0, ge=0.0)
    rare_tail: int = Field(0, ge=0)
    abnormal_fraction: float = Field(0.6, ge=0.0, le=1.0)
    binary_fraction: float = Field(0.2, ge=0.0, le=1.0)
    glyph_size: int = Field(12, ge=2)
    ambiguous_fraction: float = Field(0.15, ge=0.0, le=1.0)
    size_jitter: int = Field(16, ge=0)
    seed: int = 7


class ModelConfig(_Section):
    backbone: Literal["small", "vgg16"] = "small"
    backbone_asset: Optional[str] = None
    embeddings: Optional[str] = None
    embedding_dim: int = Field(100, ge=1)
    question_dim: int = Field(128, ge=1)
    size_dim: int = Field(32, ge=1)
    size_divisor: float = Field(1024.0, gt=0)
    glimpses: int = Field(2, ge=1)
    support_dim: int = Field(64, ge=1)
    classifier_dim: int = Field(256, ge=1)
    categorizer_dim: int = Field(64, ge=1)
    facts: bool = True


class FreezeFlags(_Section):
    embeddings: bool = False
    backbone: bool = False


class StageOverrides(_Section):
    epochs: Optional[int] = Field(None, ge=0)
    learning_rate: Optional[float] = Field(None, gt=0)
    batch_size: Optional[int] = Field(None, ge=1)


class TrainingConfig(_Section):
    batch_size: int = Field(256, ge=1)
    learning_rate: float = Field(1e-4, gt=0)
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = Field(1e-8, gt=0)
    dropout: float = Field(0.5, ge=0.0, lt=1.0)
    epochs: int = Field(10, ge=0)
    seed: int = 0
    freeze: FreezeFlags = FreezeFlags()
    stages: Dict[str, StageOverrides] = {}
    stage: Optional[Literal["categorizer", "input_fusion", "if1c", "sfn"]] = None

    @field_validator("stages")
    @classmethod
    def _known_stages(cls, value: Dict[str, StageOverrides]) -> Dict[str, StageOverrides]:
        unknown = sorted(set(value) - set(STAGES))
        if unknown:
            raise ValueError(f"unknown stage(s) {unknown}, expected one of {list(STAGES)}")
        return value

    def for_stage(self, stage: str) -> "TrainingConfig":
        """Return a copy with the stage's overrides applied and `stage` set."""
        if stage not in STAGES:
            raise ConfigError(f"Unknown stage: {stage}. Valid values: {', '.join(STAGES)}")
        overrides = self.stages.get(stage, StageOverrides())
        update = {k: v for k, v in overrides.model_dump().items() if v is not None}
        update["stage"] = stage
        return self.model_copy(update=update)


class SamplingConfig(_Section):
    weighted: bool = True
    balance_categories: bool = False


class ResampleConfig(_Section):
    ratio: Tuple[int, int] = (19, 1)
    stratified: bool = False
    seed: int = 0

    @field_validator("ratio")
    @classmethod
    def _positive_ratio(cls, value: Tuple[int, int]) -> Tuple[int, int]:
        if value[0] < 1 or value[1] < 1:
            raise ValueError("ratio parts must be positive integers")
        return value


class AnalysisConfig(_Section):
    prefix_tokens: int = Field(3, ge=1)
    plots: bool = True


class MetricsConfig(_Section):
    bleu: Literal["sentence", "sentence_smoothed", "corpus"] = "sentence"
    examples: int = Field(20, ge=0)


class LoggingSection(_Section):
    level: str = "INFO"
    telemetry: bool = False
    logs_dir: str = "logs"

    @field_validator("level")
    @classmethod
    def _valid_level(cls, value: str) -> str:
        valid_log_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL", "QUIET", "OFF"]
        if value.upper() not in valid_log_levels:
            raise ValueError(
                f"Invalid log level: {value}. Must be one of: {', '.join(valid_log_levels)}"
            )
        return value.upper()


class RuntimeConfig(_Section):
    threads: int = Field(1, ge=1)


class AppConfig(_Section):
    data: DataConfig
    synthetic: SyntheticSpec = SyntheticSpec()
    model: ModelConfig = ModelConfig()
    training: TrainingConfig = TrainingConfig()
    sampling: SamplingConfig = SamplingConfig()
    resample: ResampleConfig = ResampleConfig()
    analysis: AnalysisConfig = AnalysisConfig()
    metrics: MetricsConfig = MetricsConfig()
    logging: LoggingSection = LoggingSection()
    runtime: RuntimeConfig = RuntimeConfig()


# ============================================================================
# LOADING
# ============================================================================

def _read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            content = yaml.safe_load(f) or {}
    except FileNotFoundError as e:
        raise ConfigError(f"Configuration file not found: {path}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"Configuration file {path} is not valid YAML: {e}") from e
    if not isinstance(content, dict):
        raise ConfigError(f"Configuration file {path} must contain a mapping at top level")
    return content


def deep_merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge update into a copy of base; mappings merge, everything else replaces."""
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def parse_override(expression: str) -> Dict[str, Any]:
    """Turn 'section.key=value' into a nested mapping; the value is parsed as YAML."""
    if "=" not in expression:
        raise ConfigError(f"Invalid --set expression '{expression}', expected section.key=value")
    dotted, raw_value = expression.split("=", 1)
    keys = [k.strip() for k in dotted.split(".")]
    if not all(keys):
        raise ConfigError(f"Invalid --set key '{dotted}'")
    try:
        value = yaml.safe_load(raw_value) if raw_value.strip() else None
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid value in --set '{expression}': {e}") from e
    nested: Dict[str, Any] = {keys[-1]: value}
    for key in reversed(keys[:-1]):
        nested = {key: nested}
    return nested


def _environment_overrides() -> Dict[str, Any]:
    """Read the supported SFN_* environment variables (after loading an optional .env)."""
    load_dotenv()
    overrides: Dict[str, Any] = {}
    if os.getenv("SFN_LOG_LEVEL"):
        overrides.setdefault("logging", {})["level"] = os.getenv("SFN_LOG_LEVEL").upper()
    if os.getenv("SFN_TELEMETRY"):
        overrides.setdefault("logging", {})["telemetry"] = (
            os.getenv("SFN_TELEMETRY", "false").lower() == "true"
        )
    if os.getenv("SFN_THREADS"):
        try:
            overrides.setdefault("runtime", {})["threads"] = int(os.getenv("SFN_THREADS"))
        except ValueError as e:
            raise ConfigError(f"SFN_THREADS must be an integer, got {os.getenv('SFN_THREADS')!r}") from e
    return overrides


def get_config(
    config_file: Optional[str] = None,
    overrides: Iterable[str] = (),
    use_environment: bool = True,
) -> AppConfig:
    """Build the effective configuration: defaults < config file < environment < --set."""
    raw = _read_yaml(DEFAULTS_FILE)
    if config_file:
        raw = deep_merge(raw, _read_yaml(Path(config_file)))
    if use_environment:
        raw = deep_merge(raw, _environment_overrides())
    for expression in overrides:
        raw = deep_merge(raw, parse_override(expression))
    try:
        return AppConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"Invalid configuration at '{location}': {first['msg']}") from e


def config_to_dict(config: BaseModel) -> Dict[str, Any]:
    return config.model_dump(mode="json")


def fingerprint(*sections: BaseModel) -> str:
    """SHA-256 over the canonical JSON of the given config sections."""
    payload = json.dumps(
        [config_to_dict(section) for section in sections],
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def echo_config(config: AppConfig, out_dir: Path) -> Path:
    """Write the effective configuration as config.yaml into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / "config.yaml"
    with open(target, "w", encoding="utf-8") as f:
        yaml.safe_dump(config_to_dict(config), f, sort_keys=True, default_flow_style=False)
    return target


def print_config_help():
    """Print configuration help"""
    print("\nSFN pipeline configuration:")
    print("===========================")
    print()
    print("Configuration sources (later wins):")
    print("  1. built-in defaults (sfn_vqa/config/defaults.yaml)")
    print("  2. --config FILE        YAML file with the same sections")
    print("  3. environment variables (an optional .env file is loaded first)")
    print("  4. --set section.key=value (repeatable)")
    print()
    print("Environment Variables:")
    print("  SFN_LOG_LEVEL    Logging level (default: INFO, options: DEBUG, INFO, WARNING, ERROR, CRITICAL, QUIET, OFF)")
    print("  SFN_TELEMETRY    Write per-stage session telemetry under logging.logs_dir (default: false)")
    print("  SFN_THREADS      Worker threads; 1 forces the deterministic mode (default: 1)")
    print()
    print("Sections: data, synthetic, model, training, sampling, resample, analysis, metrics, logging, runtime")
    print()
    print("Example:")
    print("  sfn-vqa train --stage sfn --data ./synthetic --out ./runs/sfn \\")
    print("      --categorizer ./runs/categorizer --fusion ./runs/fusion \\")
    print("      --set training.epochs=5 --set model.backbone=small")
    print()
