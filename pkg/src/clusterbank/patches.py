"""Local-aware patch features from raw intermediate feature maps.

For archives that ship raw backbone layer outputs instead of pre-aggregated
patches: each layer map is smoothed with a mean window (count-normalized zero
padding, so constant maps stay constant at the borders), coarser layers are
bilinearly resized to the reference grid, and channels are concatenated in
the order the layers are given.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .archive import PatchGrid


@dataclass(frozen=True)
class LayerMap:
    layer_id: int
    tensor: np.ndarray  # (H_f, W_f, C_f)

    def __post_init__(self):
        if self.tensor.ndim != 3 or min(self.tensor.shape) < 1:
            raise ValueError(f"layer {self.layer_id}: tensor must be (H, W, C) with positive dims")


@dataclass(frozen=True)
class PatchTensor:
    tensor: np.ndarray  # (grid_h, grid_w, patch_dim)
    provenance: PatchGrid


def aggregate_window(
    layer: LayerMap, w: int = 3, h: int = 3, stride: int = 1, p: int = 1
) -> LayerMap:
    """Mean over a w x h neighborhood at every cell.

    Zero padding is normalized by the count of in-bounds cells, so border
    output equals the mean of the cells actually present. With stride 1 and
    p = (w-1)/2 the output grid equals the input grid
    (W_out = W_f + 2p - w + 1).
    """
    if w % 2 == 0 or h % 2 == 0:
        raise ValueError(f"window must be odd, got {w}x{h}")
    if stride != 1:
        raise ValueError("only stride 1 is supported")
    if p != (w - 1) // 2 or p != (h - 1) // 2:
        raise ValueError("padding must be (window - 1) / 2 so the grid is preserved")
    t = np.asarray(layer.tensor, dtype=np.float64)
    hf, wf, cf = t.shape
    # sliding-window sums via a 2-D prefix sum, one pass for values and counts
    padded = np.zeros((hf + 2 * p, wf + 2 * p, cf))
    padded[p : p + hf, p : p + wf, :] = t
    csum = padded.cumsum(axis=0).cumsum(axis=1)
    csum = np.pad(csum, ((1, 0), (1, 0), (0, 0)))
    sums = (
        csum[h:, w:, :]
        - csum[:-h, w:, :]
        - csum[h:, :-w, :]
        + csum[:-h, :-w, :]
    )
    ones = np.zeros((hf + 2 * p, wf + 2 * p))
    ones[p : p + hf, p : p + wf] = 1.0
    cnt = ones.cumsum(axis=0).cumsum(axis=1)
    cnt = np.pad(cnt, ((1, 0), (1, 0)))
    counts = cnt[h:, w:] - cnt[:-h, w:] - cnt[h:, :-w] + cnt[:-h, :-w]
    out = sums / counts[:, :, None]
    return LayerMap(layer_id=layer.layer_id, tensor=out.astype(np.float32))


def resize_bilinear_map(tensor: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Corner-aligned bilinear resize of an (H, W, C) map."""
    t = np.asarray(tensor, dtype=np.float64)
    hf, wf = t.shape[:2]

    def positions(src: int, dst: int) -> np.ndarray:
        if dst == 1 or src == 1:
            return np.zeros(dst)
        return np.arange(dst) * ((src - 1) / (dst - 1))

    ys, xs = positions(hf, target_h), positions(wf, target_w)
    y0 = np.clip(np.floor(ys).astype(int), 0, hf - 1)
    y1 = np.minimum(y0 + 1, hf - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, wf - 1)
    x1 = np.minimum(x0 + 1, wf - 1)
    wy = (ys - y0)[:, None, None]
    wx = (xs - x0)[None, :, None]
    top = t[y0][:, x0] * (1 - wx) + t[y0][:, x1] * wx
    bot = t[y1][:, x0] * (1 - wx) + t[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def merge_layers(maps: list[LayerMap]) -> PatchTensor:
    """Resize every map to the highest-resolution grid and concatenate channels.

    Channel order follows the given layer order with channels within a layer
    preserved; this ordering is part of the serialization contract.
    """
    if not maps:
        raise ValueError("merge_layers needs at least one map")
    ref_idx = max(
        range(len(maps)),
        key=lambda i: maps[i].tensor.shape[0] * maps[i].tensor.shape[1],
    )
    ref_h, ref_w = maps[ref_idx].tensor.shape[:2]
    parts = []
    for m in maps:
        t = m.tensor
        if t.shape[:2] != (ref_h, ref_w):
            t = resize_bilinear_map(t, ref_h, ref_w)
        parts.append(np.asarray(t, dtype=np.float64))
    merged = np.concatenate(parts, axis=2).astype(np.float32)
    grid = PatchGrid(grid_w=ref_w, grid_h=ref_h, window=(3, 3), padding=1, stride=1)
    return PatchTensor(tensor=merged, provenance=grid)


def patches_from_layers(maps: list[LayerMap], w: int = 3, h: int = 3) -> PatchTensor:
    """Full pipeline: window-aggregate each layer, then merge."""
    p = (w - 1) // 2
    return merge_layers([aggregate_window(m, w=w, h=h, p=p) for m in maps])
