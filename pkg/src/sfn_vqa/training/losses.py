"""Cross-entropy losses with per-head masking."""

from typing import Dict, Mapping, Optional, Tuple

import torch
import torch.nn.functional as F

from sfn_vqa.data.types import CATEGORY_ORDER, CategoryLabel


def masked_cross_entropy(logits: torch.Tensor, targets: torch.Tensor) -> Optional[torch.Tensor]:
    """Mean cross-entropy over rows with a target >= 0; None when no row has one."""
    keep = targets >= 0
    if not bool(keep.any()):
        return None
    return F.cross_entropy(logits[keep], targets[keep])


def multitask_loss(
    head_logits: Mapping[CategoryLabel, torch.Tensor],
    categories: torch.Tensor,
    targets: torch.Tensor,
) -> Tuple[Optional[torch.Tensor], Dict[CategoryLabel, float]]:
    """
    Unweighted sum over heads of the mean cross-entropy on the batch rows whose
    derived category is that head's. Heads without rows contribute nothing.

    Returns:
        (total loss or None when no head had a labeled row, per-head loss values)
    """
    total: Optional[torch.Tensor] = None
    per_head: Dict[CategoryLabel, float] = {}
    for category in CATEGORY_ORDER:
        if category not in head_logits:
            continue
        rows = categories == category.index
        if not bool(rows.any()):
            continue
        loss = masked_cross_entropy(head_logits[category][rows], targets[rows])
        if loss is None:
            continue
        per_head[category] = float(loss.detach())
        total = loss if total is None else total + loss
    return total, per_head
