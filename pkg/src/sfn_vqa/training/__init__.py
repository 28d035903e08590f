# __init__.py
#
# Only the leaf modules are re-exported: the models import the checkpoint and
# loss helpers, and the stages import the models.

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .losses import masked_cross_entropy, multitask_loss

__all__ = [
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "masked_cross_entropy",
    "multitask_loss",
]
