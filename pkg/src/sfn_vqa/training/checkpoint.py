"""
Checkpoint directories.

Layout:
    manifest.json  array entries (name, shape, dtype "f32", offset, length in bytes),
                   config fingerprint, stage tag, model config, run metadata
    params.bin     all arrays concatenated, little-endian float32, row-major
    vocab.json     vocabulary tokens in index order (optional)
    answers.json   the five answer dictionaries and the global one (optional)

JSON files are written with sorted keys so that saving the same state twice
produces byte-identical files. Pretrained backbone assets use the same
manifest + params.bin pair without the vocabulary and dictionaries.
"""

import json
import re
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np
import torch
from torch import nn

from sfn_vqa.core.exceptions import CheckpointError
from sfn_vqa.core.logging import get_logger
from sfn_vqa.data.dictionaries import AnswerDictionary, dictionaries_from_json, dictionaries_to_json
from sfn_vqa.data.text import Vocabulary
from sfn_vqa.data.types import CategoryLabel

logger = get_logger(__name__)

MANIFEST_FILE = "manifest.json"
PARAMS_FILE = "params.bin"
VOCAB_FILE = "vocab.json"
ANSWERS_FILE = "answers.json"
FORMAT_VERSION = 1
DTYPE = "f32"
_NUMPY_DTYPE = np.dtype("<f4")
_HEAD_RE = re.compile(r"\.(C[1-4]|Binary)\.")


@dataclass
class Checkpoint:
    arrays: "OrderedDict[str, np.ndarray]"
    stage: str
    fingerprint: str
    model_config: Dict[str, Any]
    vocab: Optional[Vocabulary] = None
    dictionaries: Optional[Dict[CategoryLabel, AnswerDictionary]] = None
    global_dictionary: Optional[AnswerDictionary] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def subset(self, prefix: str) -> "OrderedDict[str, np.ndarray]":
        """Arrays under `prefix.`, with the prefix removed."""
        cut = len(prefix) + 1
        return OrderedDict((name[cut:], array) for name, array in self.arrays.items() if name.startswith(prefix + "."))


def _dump_json(payload: Any, path: Path) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise CheckpointError(f"Checkpoint file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise CheckpointError(f"{path} is not valid JSON: {e}") from e


def _head_hint(name: str) -> str:
    match = _HEAD_RE.search(name)
    return f" (head {match.group(1)})" if match else ""


# ============================================================================
# NAMED ARRAYS
# ============================================================================

def arrays_from_module(module: nn.Module, prefix: str = "") -> "OrderedDict[str, np.ndarray]":
    """State of a module as float32 arrays, in state_dict order."""
    arrays = OrderedDict()
    for name, tensor in module.state_dict().items():
        key = f"{prefix}.{name}" if prefix else name
        arrays[key] = np.ascontiguousarray(tensor.detach().cpu().numpy().astype(_NUMPY_DTYPE))
    return arrays


def load_arrays_into(module: nn.Module, arrays: Mapping[str, np.ndarray]) -> None:
    """
    Copy arrays into the module's parameters and buffers.

    Raises:
        CheckpointError: naming the first missing, unexpected or mis-shaped array
    """
    state = module.state_dict()
    for name, tensor in state.items():
        if name not in arrays:
            raise CheckpointError(f"Checkpoint is missing array '{name}'{_head_hint(name)}")
        if tuple(arrays[name].shape) != tuple(tensor.shape):
            raise CheckpointError(
                f"Array '{name}'{_head_hint(name)} has shape {tuple(arrays[name].shape)}, "
                f"the model expects {tuple(tensor.shape)}"
            )
    for name in arrays:
        if name not in state:
            raise CheckpointError(f"Checkpoint has unexpected array '{name}'{_head_hint(name)}")
    module.load_state_dict(
        OrderedDict((name, torch.from_numpy(np.array(arrays[name])).to(state[name].dtype)) for name in state)
    )


def write_named_arrays(directory, arrays: Mapping[str, np.ndarray], header: Dict[str, Any]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries, offset = [], 0
    with open(directory / PARAMS_FILE, "wb") as f:
        for name, array in arrays.items():
            data = np.ascontiguousarray(array, dtype=_NUMPY_DTYPE).tobytes(order="C")
            entries.append(
                {"name": name, "shape": list(array.shape), "dtype": DTYPE, "offset": offset, "length": len(data)}
            )
            f.write(data)
            offset += len(data)
    _dump_json({**header, "format": FORMAT_VERSION, "arrays": entries}, directory / MANIFEST_FILE)


def read_named_arrays(directory) -> Tuple["OrderedDict[str, np.ndarray]", Dict[str, Any]]:
    """
    Read manifest.json + params.bin.

    Raises:
        CheckpointError: naming the first array whose dtype, shape, offset or length
            disagrees with the manifest or the parameter file
    """
    directory = Path(directory)
    manifest = _read_json(directory / MANIFEST_FILE)
    if manifest.get("format") != FORMAT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint format {manifest.get('format')!r} in {directory}")
    try:
        blob = (directory / PARAMS_FILE).read_bytes()
    except FileNotFoundError as e:
        raise CheckpointError(f"Checkpoint file not found: {directory / PARAMS_FILE}") from e

    arrays = OrderedDict()
    expected_offset = 0
    for entry in manifest.get("arrays", []):
        name = entry.get("name", "<unnamed>")
        if entry.get("dtype") != DTYPE:
            raise CheckpointError(f"Array '{name}' has dtype {entry.get('dtype')!r}, expected '{DTYPE}'")
        shape = tuple(int(d) for d in entry.get("shape", ()))
        if any(d < 0 for d in shape):
            raise CheckpointError(f"Array '{name}' has a negative dimension in shape {shape}")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        length = count * _NUMPY_DTYPE.itemsize
        if entry.get("length") != length:
            raise CheckpointError(
                f"Array '{name}' declares length {entry.get('length')} bytes, its shape {shape} needs {length}"
            )
        if entry.get("offset") != expected_offset:
            raise CheckpointError(
                f"Array '{name}' declares offset {entry.get('offset')}, expected {expected_offset}"
            )
        if expected_offset + length > len(blob):
            raise CheckpointError(f"Array '{name}' extends past the end of {PARAMS_FILE}")
        arrays[name] = np.frombuffer(blob, dtype=_NUMPY_DTYPE, count=count, offset=expected_offset).reshape(shape).copy()
        expected_offset += length
    if expected_offset != len(blob):
        raise CheckpointError(
            f"{PARAMS_FILE} holds {len(blob)} bytes but the manifest accounts for {expected_offset}"
        )
    return arrays, manifest


# ============================================================================
# CHECKPOINTS
# ============================================================================

def save_checkpoint(checkpoint: Checkpoint, directory) -> Path:
    directory = Path(directory)
    header = {
        "stage": checkpoint.stage,
        "fingerprint": checkpoint.fingerprint,
        "model": checkpoint.model_config,
        "metadata": checkpoint.metadata,
    }
    try:
        write_named_arrays(directory, checkpoint.arrays, header)
        if checkpoint.vocab is not None:
            _dump_json(checkpoint.vocab.to_list(), directory / VOCAB_FILE)
        if checkpoint.dictionaries is not None:
            _dump_json(
                dictionaries_to_json(checkpoint.dictionaries, checkpoint.global_dictionary),
                directory / ANSWERS_FILE,
            )
    except OSError as e:
        raise CheckpointError(f"Cannot write checkpoint to {directory}: {e}") from e
    logger.info(f"Saved {checkpoint.stage} checkpoint ({len(checkpoint.arrays)} arrays) to {directory}")
    return directory


def load_checkpoint(directory) -> Checkpoint:
    directory = Path(directory)
    if not directory.is_dir():
        raise CheckpointError(f"Checkpoint directory not found: {directory}")
    arrays, manifest = read_named_arrays(directory)
    vocab = None
    if (directory / VOCAB_FILE).exists():
        vocab = Vocabulary.from_list(_read_json(directory / VOCAB_FILE))
    dictionaries, global_dictionary = None, None
    if (directory / ANSWERS_FILE).exists():
        dictionaries, global_dictionary = dictionaries_from_json(_read_json(directory / ANSWERS_FILE))
    return Checkpoint(
        arrays=arrays,
        stage=manifest.get("stage", ""),
        fingerprint=manifest.get("fingerprint", ""),
        model_config=manifest.get("model", {}),
        vocab=vocab,
        dictionaries=dictionaries,
        global_dictionary=global_dictionary,
        metadata=manifest.get("metadata", {}),
    )
