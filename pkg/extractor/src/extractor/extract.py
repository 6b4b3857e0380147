"""Extraction pipeline: images -> normalized batches -> stage maps -> archive."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .aggregate import local_patches, window_mean
from .archive_writer import ArchiveWriter
from .backbone import IMAGENET_MEAN, IMAGENET_STD, StageExtractor
from .dataset import ImageEntry, scan_dataset


@dataclass(frozen=True)
class ExtractSpec:
    root: str
    out: str
    resize: tuple[int, int] = (256, 256)  # (W, H)
    backbone: str = "wide_resnet50_2"
    pretrained: bool = True
    raw_stages: bool = False  # additionally emit unaggregated stage maps
    classes: Optional[tuple[str, ...]] = None
    batch_size: int = 8
    window: int = 3


def _load_image(path: Path, size_wh: tuple[int, int]) -> torch.Tensor:
    img = Image.open(path).convert("RGB").resize(size_wh, Image.BILINEAR)
    arr = np.asarray(img, dtype=np.float32) / 255.0
    arr = (arr - np.array(IMAGENET_MEAN, dtype=np.float32)) / np.array(
        IMAGENET_STD, dtype=np.float32
    )
    return torch.from_numpy(arr).permute(2, 0, 1)


def _load_mask(path: Path, size_wh: tuple[int, int]) -> np.ndarray:
    img = Image.open(path).convert("L").resize(size_wh, Image.NEAREST)
    return np.asarray(img) > 127


def extract(spec: ExtractSpec) -> Path:
    """Run the backbone over the dataset and write a feature archive.

    Returns the manifest path. Corrupt images are skipped and listed in the
    manifest's warning list.
    """
    entries = scan_dataset(spec.root, classes=list(spec.classes) if spec.classes else None)
    extractor = StageExtractor(spec.backbone, pretrained=spec.pretrained)

    writer: Optional[ArchiveWriter] = None
    skipped: list[str] = []
    batch_entries: list[ImageEntry] = []
    batch_tensors: list[torch.Tensor] = []

    def flush():
        nonlocal writer
        if not batch_entries:
            return
        batch = torch.stack(batch_tensors)
        stage_maps = extractor.forward(batch)
        semantic = extractor.semantic(stage_maps).cpu().numpy()
        locals_ = [stage_maps[s] for s in extractor.spec.local_stages]
        patches = local_patches(locals_, window=spec.window)  # (N, C, H, W)
        patches_np = patches.permute(0, 2, 3, 1).cpu().numpy()  # (N, H, W, C)
        if writer is None:
            writer = ArchiveWriter(
                spec.out,
                semantic_dim=semantic.shape[1],
                patch_dim=patches_np.shape[3],
                grid_hw=(patches_np.shape[1], patches_np.shape[2]),
                window=spec.window,
                meta={
                    "generator": "backbone-extractor",
                    "backbone": spec.backbone,
                    "pretrained": spec.pretrained,
                    "resize": list(spec.resize),
                    "semantic_stage": extractor.spec.semantic_stage,
                    "local_stages": list(extractor.spec.local_stages),
                    "semantic_pooling": "global-average",
                },
            )
        for i, entry in enumerate(batch_entries):
            mask = None
            if entry.mask_path is not None:
                mask = _load_mask(entry.mask_path, spec.resize)
            raw = None
            if spec.raw_stages:
                raw = [
                    stage_maps[s][i].permute(1, 2, 0).cpu().numpy()
                    for s in extractor.spec.local_stages
                ]
            writer.add_record(
                record_id=entry.record_id,
                split=entry.split,
                class_label=entry.class_name,
                gt_label="abnormal" if entry.is_abnormal else "normal",
                image_size_wh=spec.resize,
                semantic=semantic[i],
                patches=patches_np[i],
                mask=mask,
                raw_layers=raw,
            )
        batch_entries.clear()
        batch_tensors.clear()

    for entry in entries:
        try:
            tensor = _load_image(entry.image_path, spec.resize)
        except (OSError, UnidentifiedImageError) as e:
            skipped.append(f"{entry.image_path}: {e}")
            continue
        batch_entries.append(entry)
        batch_tensors.append(tensor)
        if len(batch_entries) >= spec.batch_size:
            flush()
    flush()

    if writer is None:
        raise RuntimeError("no readable images found; nothing to write")
    for msg in skipped:
        writer.warn(msg)
    return writer.finish()


def aggregate_reference(stage_maps: list[np.ndarray], window: int = 3) -> np.ndarray:
    """The extractor's own aggregation on (H, W, C) numpy maps.

    Used by the pooling-convention cross-check against the engine's
    implementation; must agree within 1e-4 relative.
    """
    tensors = [
        torch.from_numpy(np.ascontiguousarray(m, dtype=np.float32)).permute(2, 0, 1)[None]
        for m in stage_maps
    ]
    out = local_patches(tensors, window=window)
    return out[0].permute(1, 2, 0).numpy()
