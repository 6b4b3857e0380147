"""Anomaly scoring: nearest-neighbor patch distances against the routed bank.

Each test image is routed to the cluster with the nearest semantic key; every
patch cell is scored by its L2 distance to the closest coreset row of that
cluster's bank. The patch grid is bilinearly upsampled (corner-aligned) to
image resolution and the image-level score is the maximum patch score.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.spatial.distance import cdist

from .archive import FeatureArchive, ImageRecord
from .bank import HierMemoryBank, route
from .costs import CostCounters


@dataclass
class AnomalyResult:
    record_id: str
    routed_cluster: int
    patch_scores: np.ndarray  # (grid_h, grid_w) float32
    score_map: np.ndarray  # (H, W) float32
    image_score: float  # max of patch_scores


def upsample_bilinear(grid: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Corner-aligned bilinear upsample of a 2-D grid.

    Grid cell centers map to evenly spaced target positions including both
    extremes; a 1x1 grid broadcasts its value. Interpolated values never
    exceed the grid maximum, and cells are reproduced exactly wherever
    (target-1) is a multiple of (grid-1).
    """
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 2 or min(g.shape) < 1:
        raise ValueError(f"grid must be 2-D and non-empty, got shape {g.shape}")
    if target_h < 1 or target_w < 1:
        raise ValueError("target dims must be positive")
    h, w = g.shape

    def positions(src: int, dst: int) -> np.ndarray:
        if src == 1 or dst == 1:
            return np.zeros(dst)
        return np.arange(dst) * ((src - 1) / (dst - 1))

    ys, xs = positions(h, target_h), positions(w, target_w)
    y0 = np.floor(ys).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x0 = np.floor(xs).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    out = (
        g[np.ix_(y0, x0)] * (1 - wy) * (1 - wx)
        + g[np.ix_(y0, x1)] * (1 - wy) * wx
        + g[np.ix_(y1, x0)] * wy * (1 - wx)
        + g[np.ix_(y1, x1)] * wy * wx
    )
    return out


def score_record(
    record: ImageRecord, bank: HierMemoryBank, smooth_sigma: Optional[float] = None
) -> AnomalyResult:
    """Score one record against its routed bank.

    ``smooth_sigma`` optionally Gaussian-blurs the upsampled map (post-hoc
    presentation only); the image score always comes from the raw patch grid.
    """
    gh, gw, pd = record.patches.shape
    if pd != bank.patch_dim:
        raise ValueError(f"record {record.id!r}: patch dim {pd} != bank dim {bank.patch_dim}")
    k = route(record.semantic, bank)
    rows = bank.banks[k].vectors.astype(np.float64)
    flat = record.patches.reshape(-1, pd).astype(np.float64)
    dists = cdist(flat, rows).min(axis=1)
    patch_scores = dists.reshape(gh, gw).astype(np.float32)
    w, h = record.image_size
    score_map = upsample_bilinear(patch_scores, h, w)
    if smooth_sigma is not None and smooth_sigma > 0:
        score_map = gaussian_filter(score_map, sigma=smooth_sigma)
    return AnomalyResult(
        record_id=record.id,
        routed_cluster=k,
        patch_scores=patch_scores,
        score_map=score_map.astype(np.float32),
        image_score=float(patch_scores.max()),
    )


def score_batch(
    archive: FeatureArchive,
    bank: HierMemoryBank,
    smooth_sigma: Optional[float] = None,
    threads: int = 1,
) -> tuple[list[AnomalyResult], CostCounters]:
    """Score the test split in manifest order and tally distance evaluations."""
    records = archive.test_records()
    if threads > 1 and records:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(lambda r: score_record(r, bank, smooth_sigma), records))
    else:
        results = [score_record(r, bank, smooth_sigma) for r in records]
    counters = CostCounters(
        clustering_distance_evals=bank.clustering_distance_evals,
        build_distance_evals=bank.build_distance_evals,
        patch_counts=list(bank.patch_counts),
    )
    grid_cells = archive.patch_grid.grid_h * archive.patch_grid.grid_w
    for res in results:
        counters.query_distance_evals += grid_cells * len(bank.banks[res.routed_cluster])
    return results, counters


def write_scores_jsonl(results: list[AnomalyResult], path: str | Path) -> None:
    """One line per record: id, routed cluster, image score."""
    with open(path, "w") as f:
        for r in results:
            f.write(
                json.dumps(
                    {
                        "id": r.record_id,
                        "routed_cluster": r.routed_cluster,
                        "image_score": r.image_score,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
