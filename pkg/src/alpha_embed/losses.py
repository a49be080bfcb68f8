"""Cosine-logit losses with an adaptive scale, plus plain masked cross-entropy.

The adaptive scale follows the dynamic-AdaCos recipe: the loss for a step
is computed with the scale carried in from the previous step, then the
scale is re-estimated from that step's cosine statistics.  Batch and
length axes are flattened together with padding positions dropped, so a
sequence batch behaves exactly like a flat classification batch.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .errors import ConfigError, MaskError, RangeError

SCALE_FLOOR = 1.0
SCALE_CLIP = 100.0
_COSINE_TOL = 1e-4


@dataclass(frozen=True)
class AdaCosState:
    """Adaptive scale with its class count and clipping bounds."""

    scale: float
    class_count: int
    floor: float = SCALE_FLOOR
    clip_max: float = SCALE_CLIP

    def __post_init__(self):
        if not self.floor <= self.scale <= self.clip_max:
            raise ValueError(f"scale {self.scale} outside [{self.floor}, {self.clip_max}]")


def adacos_init(class_count: int) -> AdaCosState:
    """Initial state with scale sqrt(2) * ln(C - 1), clipped to [floor, clip max]."""
    if class_count < 2:
        raise ConfigError(f"need at least 2 classes, got {class_count}")
    raw = math.sqrt(2.0) * math.log(class_count - 1)
    return AdaCosState(min(max(raw, SCALE_FLOOR), SCALE_CLIP), class_count)


def _flatten_non_pad(values: torch.Tensor, targets: torch.Tensor, pad_mask: torch.Tensor):
    # pad_mask is True at padding positions; leading shapes must agree.
    keep = ~pad_mask
    if not bool(keep.any()):
        raise MaskError("every position is padding")
    return values[keep], targets[keep]


def adacos_step(
    cosines: torch.Tensor,
    targets: torch.Tensor,
    pad_mask: torch.Tensor,
    state: AdaCosState,
) -> tuple[torch.Tensor, AdaCosState]:
    """Masked cross-entropy over scaled cosines, then the scale update.

    ``cosines`` has shape (..., C) and ``targets``/``pad_mask`` the matching
    leading shape.  The returned loss uses the incoming scale; the returned
    state carries the re-estimated one.  The update itself runs detached in
    float64 because exp(scale * cos) can reach exp(100).
    """
    if float(cosines.detach().abs().max()) > 1.0 + _COSINE_TOL:
        raise RangeError("cosine logits outside [-1, 1]")
    cos_flat, tgt_flat = _flatten_non_pad(cosines, targets, pad_mask)
    loss = F.cross_entropy(state.scale * cos_flat, tgt_flat)

    with torch.no_grad():
        c = cos_flat.detach().double()
        exp_all = torch.exp(state.scale * c)
        # Zero the target column instead of subtracting it afterwards: the
        # target term can dwarf the rest and cancel away their low bits.
        exp_others = exp_all.scatter(1, tgt_flat.unsqueeze(1), 0.0)
        b_avg = float(exp_others.sum(dim=1).mean())
        target_cos = c.gather(1, tgt_flat.unsqueeze(1)).squeeze(1).clamp(-1.0, 1.0)
        angles = torch.sort(torch.acos(target_cos)).values
        theta_med = float(angles[(angles.numel() - 1) // 2])  # lower median
        raw = math.log(b_avg) / math.cos(min(math.pi / 4.0, theta_med))
        new_scale = min(max(raw, state.floor), state.clip_max)

    return loss, dataclasses.replace(state, scale=new_scale)


def cross_entropy(logits: torch.Tensor, targets: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
    """Token-level mean cross-entropy over non-padding positions."""
    flat, tgt = _flatten_non_pad(logits, targets, pad_mask)
    return F.cross_entropy(flat, tgt)
