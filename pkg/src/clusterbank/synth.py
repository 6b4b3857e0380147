"""Synthetic feature generator: desk-scale stand-in for a pretrained encoder.

Each pseudo-class is a Gaussian in semantic space and another in patch space.
Noise scales are expressed as the RMS norm of the noise vector (per-coordinate
std is ``sigma / sqrt(dim)``), so ``margin`` — the distance between class
means in units of sigma — is dimension-independent: margin 10 gives clouds
whose diameters are well below the inter-class gap.

Abnormal test images get an additive offset of L2 magnitude ``delta`` applied
to every patch cell inside a random axis-aligned rectangle; the ground-truth
mask is that rectangle upsampled to image resolution with the same
corner-aligned geometry the scorer uses, so localization has a known answer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .archive import (
    LABEL_ABNORMAL,
    LABEL_NORMAL,
    SPLIT_TEST,
    SPLIT_TRAIN,
    FeatureArchive,
    ImageRecord,
    PatchGrid,
)


@dataclass(frozen=True)
class ClassParams:
    """Gaussian parameters for one pseudo-class."""

    semantic_mean: np.ndarray
    patch_mean: np.ndarray
    sigma_semantic: float = 1.0
    sigma_patch: float = 0.1
    delta: float = 5.0  # anomaly offset magnitude


@dataclass(frozen=True)
class SynthSpec:
    classes: tuple[ClassParams, ...]
    train_per_class: int = 50
    test_per_class: int = 20
    grid: tuple[int, int] = (8, 8)  # (grid_h, grid_w)
    image_size: tuple[int, int] = (64, 64)  # (W, H)
    anomaly_rate: float = 0.5

    @property
    def semantic_dim(self) -> int:
        return int(self.classes[0].semantic_mean.shape[0])

    @property
    def patch_dim(self) -> int:
        return int(self.classes[0].patch_mean.shape[0])

    def validate(self) -> None:
        if not self.classes:
            raise ValueError("need at least one class")
        if self.semantic_dim < 1 or self.patch_dim < 1:
            raise ValueError("feature dimensions must be positive")
        if not (0.0 <= self.anomaly_rate <= 1.0):
            raise ValueError(f"anomaly rate {self.anomaly_rate} outside [0, 1]")
        if self.train_per_class < 1 or self.test_per_class < 0:
            raise ValueError("per-class counts must be positive")
        if min(self.grid) < 1 or min(self.image_size) < 1:
            raise ValueError("grid and image size must be positive")
        for cp in self.classes:
            if cp.semantic_mean.shape != (self.semantic_dim,):
                raise ValueError("inconsistent semantic dims across classes")
            if cp.patch_mean.shape != (self.patch_dim,):
                raise ValueError("inconsistent patch dims across classes")


def separable_spec(
    n_classes: int = 2,
    margin: float = 10.0,
    semantic_dim: int = 8,
    patch_dim: int = 16,
    sigma_semantic: float = 1.0,
    sigma_patch: float = 0.1,
    delta: float = 5.0,
    patch_margin: Optional[float] = None,
    train_per_class: int = 50,
    test_per_class: int = 20,
    grid: tuple[int, int] = (8, 8),
    image_size: tuple[int, int] = (64, 64),
    anomaly_rate: float = 0.5,
    sigma_patch_by_class: Optional[list[float]] = None,
    delta_by_class: Optional[list[float]] = None,
) -> SynthSpec:
    """Spec with class means on orthogonal axes, pairwise ``margin`` sigmas apart.

    Patch-space means are separated analogously (``patch_margin`` defaults to
    ``margin``); per-class sigma/delta overrides let tests construct classes
    with deliberately shifted score ranges.
    """
    if semantic_dim < n_classes:
        raise ValueError("semantic_dim must be >= n_classes for orthogonal means")
    if patch_dim < n_classes:
        raise ValueError("patch_dim must be >= n_classes for orthogonal means")
    if patch_margin is None:
        patch_margin = margin
    classes = []
    for c in range(n_classes):
        sp = sigma_patch if sigma_patch_by_class is None else sigma_patch_by_class[c]
        dl = delta if delta_by_class is None else delta_by_class[c]
        sem_mean = np.zeros(semantic_dim)
        # orthogonal placement: pairwise distance = margin * sigma
        sem_mean[c] = margin * sigma_semantic / np.sqrt(2.0)
        pat_mean = np.zeros(patch_dim)
        pat_mean[c] = patch_margin * sp / np.sqrt(2.0)
        classes.append(
            ClassParams(
                semantic_mean=sem_mean,
                patch_mean=pat_mean,
                sigma_semantic=sigma_semantic,
                sigma_patch=sp,
                delta=dl,
            )
        )
    return SynthSpec(
        classes=tuple(classes),
        train_per_class=train_per_class,
        test_per_class=test_per_class,
        grid=grid,
        image_size=image_size,
        anomaly_rate=anomaly_rate,
    )


def _noise(rng: np.random.Generator, shape: tuple[int, ...], sigma: float, dim: int) -> np.ndarray:
    return rng.normal(0.0, sigma / np.sqrt(dim), size=shape)


def _rect_mask_pixels(
    rect: tuple[int, int, int, int], grid: tuple[int, int], image_size: tuple[int, int]
) -> np.ndarray:
    """Upsample a grid-cell rectangle to image resolution.

    Uses the same corner-aligned geometry as the bilinear scorer: pixel p maps
    to grid coordinate p*(g-1)/(P-1), nearest cell wins.
    """
    r0, c0, r1, c1 = rect  # inclusive cell bounds
    gh, gw = grid
    iw, ih = image_size
    ys = np.arange(ih) * ((gh - 1) / (ih - 1)) if ih > 1 else np.zeros(1)
    xs = np.arange(iw) * ((gw - 1) / (iw - 1)) if iw > 1 else np.zeros(1)
    row_cells = np.floor(ys + 0.5).astype(int)
    col_cells = np.floor(xs + 0.5).astype(int)
    row_in = (row_cells >= r0) & (row_cells <= r1)
    col_in = (col_cells >= c0) & (col_cells <= c1)
    return np.outer(row_in, col_in)


def synth_generate(spec: SynthSpec, seed: int) -> FeatureArchive:
    """Deterministic synthetic archive; bit-identical for a fixed (spec, seed)."""
    spec.validate()
    rng = np.random.default_rng(seed)
    gh, gw = spec.grid
    sd, pd = spec.semantic_dim, spec.patch_dim
    n_classes = len(spec.classes)

    # abnormal slots: exactly round(rate * total test records), spread evenly
    n_test_total = n_classes * spec.test_per_class
    n_abnormal = int(np.floor(spec.anomaly_rate * n_test_total + 0.5))
    abnormal_quota = [n_abnormal // n_classes] * n_classes
    for c in range(n_abnormal % n_classes):
        abnormal_quota[c] += 1

    records: list[ImageRecord] = []
    for c, cp in enumerate(spec.classes):
        for i in range(spec.train_per_class):
            semantic = cp.semantic_mean + _noise(rng, (sd,), cp.sigma_semantic, sd)
            patches = cp.patch_mean + _noise(rng, (gh, gw, pd), cp.sigma_patch, pd)
            records.append(
                ImageRecord(
                    id=f"c{c}_train{i:04d}",
                    split=SPLIT_TRAIN,
                    class_label=f"class_{c}",
                    gt_label=LABEL_NORMAL,
                    semantic=semantic.astype(np.float32),
                    patches=patches.astype(np.float32),
                    image_size=spec.image_size,
                )
            )
        for i in range(spec.test_per_class):
            abnormal = i < abnormal_quota[c]
            semantic = cp.semantic_mean + _noise(rng, (sd,), cp.sigma_semantic, sd)
            patches = cp.patch_mean + _noise(rng, (gh, gw, pd), cp.sigma_patch, pd)
            mask = None
            if abnormal:
                rh = int(rng.integers(max(1, gh // 4), max(2, gh // 2) + 1))
                rw = int(rng.integers(max(1, gw // 4), max(2, gw // 2) + 1))
                r0 = int(rng.integers(0, gh - rh + 1))
                c0 = int(rng.integers(0, gw - rw + 1))
                direction = rng.normal(size=pd)
                direction /= np.linalg.norm(direction)
                patches[r0 : r0 + rh, c0 : c0 + rw, :] += cp.delta * direction
                mask = _rect_mask_pixels(
                    (r0, c0, r0 + rh - 1, c0 + rw - 1), spec.grid, spec.image_size
                )
            records.append(
                ImageRecord(
                    id=f"c{c}_test{i:04d}",
                    split=SPLIT_TEST,
                    class_label=f"class_{c}",
                    gt_label=LABEL_ABNORMAL if abnormal else LABEL_NORMAL,
                    gt_mask=mask,
                    semantic=semantic.astype(np.float32),
                    patches=patches.astype(np.float32),
                    image_size=spec.image_size,
                )
            )

    archive = FeatureArchive(
        manifest=records,
        semantic_dim=sd,
        patch_dim=pd,
        patch_grid=PatchGrid(grid_w=gw, grid_h=gh),
        meta={"generator": "synthetic", "seed": seed, "n_classes": n_classes},
    )
    archive.validate()
    return archive
