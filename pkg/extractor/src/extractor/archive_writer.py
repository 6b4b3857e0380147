"""Writer for the feature-archive interchange format.

Independent implementation of the on-disk contract the detection engine
reads: a JSON manifest plus one HCFS blob per record and feature kind.
Blob header: magic ``HCFS`` | u8 version=1 | u8 rank | u16 reserved |
u32 dims[rank], little-endian, then the float32 payload in C order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional

import numpy as np

BLOB_MAGIC = b"HCFS"
BLOB_VERSION = 1


def write_blob(path: Path, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array, dtype=np.float32)
    header = BLOB_MAGIC + struct.pack("<BBH", BLOB_VERSION, arr.ndim, 0)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    with open(path, "wb") as f:
        f.write(header)
        f.write(arr.tobytes(order="C"))


def mask_to_rle(mask: np.ndarray) -> dict:
    """Row-major alternating run lengths, starting with the zero run."""
    m = np.asarray(mask).astype(bool).ravel(order="C")
    counts: list[int] = []
    if m.size:
        changes = np.flatnonzero(np.diff(m.astype(np.int8)))
        edges = np.concatenate(([0], changes + 1, [m.size]))
        runs = np.diff(edges).tolist()
        if m[0]:
            counts.append(0)
        counts.extend(int(r) for r in runs)
    return {"size": [int(mask.shape[0]), int(mask.shape[1])], "counts": counts}


class ArchiveWriter:
    """Accumulates records and writes the manifest at the end."""

    def __init__(
        self,
        out_dir: str | Path,
        semantic_dim: int,
        patch_dim: int,
        grid_hw: tuple[int, int],
        window: int = 3,
        meta: Optional[dict] = None,
    ):
        self.root = Path(out_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "blobs").mkdir(exist_ok=True)
        self.semantic_dim = semantic_dim
        self.patch_dim = patch_dim
        self.grid_hw = grid_hw
        self.window = window
        self.meta = dict(meta or {})
        self.records: list[dict] = []
        self.warnings: list[str] = []

    def add_record(
        self,
        record_id: str,
        split: str,
        class_label: Optional[str],
        gt_label: str,
        image_size_wh: tuple[int, int],
        semantic: np.ndarray,
        patches: np.ndarray,
        mask: Optional[np.ndarray] = None,
        raw_layers: Optional[list[np.ndarray]] = None,
    ) -> None:
        if semantic.shape != (self.semantic_dim,):
            raise ValueError(f"{record_id}: semantic shape {semantic.shape}")
        gh, gw = self.grid_hw
        if patches.shape != (gh, gw, self.patch_dim):
            raise ValueError(f"{record_id}: patch shape {patches.shape}")
        sem_name = f"blobs/{record_id}.sem"
        pat_name = f"blobs/{record_id}.pat"
        write_blob(self.root / sem_name, semantic)
        write_blob(self.root / pat_name, patches)
        entry = {
            "id": record_id,
            "split": split,
            "class_label": class_label,
            "gt_label": gt_label,
            "mask_rle": None if mask is None else mask_to_rle(mask),
            "image_size": [int(image_size_wh[0]), int(image_size_wh[1])],
            "semantic_blob": sem_name,
            "patch_blob": pat_name,
        }
        if raw_layers is not None:
            names = []
            for j, layer in enumerate(raw_layers):
                name = f"blobs/{record_id}.s{j}"
                write_blob(self.root / name, layer)
                names.append(name)
            entry["raw_layer_blobs"] = names
        self.records.append(entry)

    def warn(self, message: str) -> None:
        self.warnings.append(message)

    def finish(self) -> Path:
        gh, gw = self.grid_hw
        pad = (self.window - 1) // 2
        manifest = {
            "format": "feature-archive",
            "version": 1,
            "semantic_dim": self.semantic_dim,
            "patch_dim": self.patch_dim,
            "patch_grid": {
                "grid_w": gw,
                "grid_h": gh,
                "window": [self.window, self.window],
                "padding": pad,
                "stride": 1,
            },
            "meta": {**self.meta, "warnings": self.warnings},
            "records": self.records,
        }
        path = self.root / "manifest.json"
        with open(path, "w") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
        return path
