"""Local-aware patch aggregation on backbone stage maps.

Matches the engine's convention exactly: 3x3 mean window with
count-normalized zero padding at stride 1, coarser stages bilinearly resized
(corner-aligned) to the highest-resolution stage, channels concatenated in
stage order.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F


def window_mean(stage: torch.Tensor, window: int = 3) -> torch.Tensor:
    """(N, C, H, W) -> same shape; mean over the window, borders normalized
    by the number of in-bounds cells."""
    if window % 2 == 0:
        raise ValueError(f"window must be odd, got {window}")
    pad = (window - 1) // 2
    return F.avg_pool2d(stage, window, stride=1, padding=pad, count_include_pad=False)


def merge_stages(stage_maps: list[torch.Tensor]) -> torch.Tensor:
    """Resize each (N, C, h, w) map to the largest grid and concatenate channels."""
    if not stage_maps:
        raise ValueError("merge_stages needs at least one map")
    ref = max(stage_maps, key=lambda t: t.shape[2] * t.shape[3])
    size = ref.shape[2:]
    parts = [
        t if t.shape[2:] == size
        else F.interpolate(t, size=size, mode="bilinear", align_corners=True)
        for t in stage_maps
    ]
    return torch.cat(parts, dim=1)


def local_patches(stage_maps: list[torch.Tensor], window: int = 3) -> torch.Tensor:
    """Window-aggregate every stage then merge: (N, C_total, H_ref, W_ref)."""
    return merge_stages([window_mean(t, window) for t in stage_maps])
