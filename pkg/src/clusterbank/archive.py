"""Feature archive: on-disk collection of per-image semantic and patch features.

An archive is a directory holding ``manifest.json`` plus one binary blob per
record and per feature kind::

    manifest.json
    blobs/<id>.sem      semantic vector, float32
    blobs/<id>.pat      patch feature map, float32, (grid_h, grid_w, patch_dim)

Blobs use a small self-describing header (magic ``HCFS``) so they can be
parsed without the manifest; ground-truth masks are run-length encoded in the
manifest to keep the blobs homogeneous float32.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

BLOB_MAGIC = b"HCFS"
BLOB_VERSION = 1

SPLIT_TRAIN = "train"
SPLIT_TEST = "test"
LABEL_NORMAL = "normal"
LABEL_ABNORMAL = "abnormal"


class ArchiveError(ValueError):
    """Validation or format failure; message names the offending record."""


@dataclass(frozen=True)
class PatchGrid:
    """Geometry of the patch map: grid size plus the window that produced it.

    With stride 1 the grid matches the source feature map:
    grid_w = W_f + 2*padding - window_w + 1 (same for height).
    """

    grid_w: int
    grid_h: int
    window: tuple[int, int] = (3, 3)
    padding: int = 1
    stride: int = 1

    def __post_init__(self):
        if self.grid_w < 1 or self.grid_h < 1:
            raise ArchiveError(f"patch grid must be positive, got {self.grid_w}x{self.grid_h}")

    def to_json(self) -> dict:
        return {
            "grid_w": self.grid_w,
            "grid_h": self.grid_h,
            "window": list(self.window),
            "padding": self.padding,
            "stride": self.stride,
        }

    @classmethod
    def from_json(cls, d: dict) -> "PatchGrid":
        return cls(
            grid_w=int(d["grid_w"]),
            grid_h=int(d["grid_h"]),
            window=(int(d["window"][0]), int(d["window"][1])),
            padding=int(d["padding"]),
            stride=int(d["stride"]),
        )


@dataclass
class ImageRecord:
    """One image's features and ground truth.

    ``gt_mask`` is a binary (H, W) array at image resolution; None stands for
    an all-zero mask (normal images). Train records must be normal.
    """

    id: str
    split: str
    gt_label: str
    semantic: np.ndarray
    patches: np.ndarray
    image_size: tuple[int, int]  # (W, H)
    class_label: Optional[str] = None
    gt_mask: Optional[np.ndarray] = None

    def mask_array(self) -> np.ndarray:
        """Mask as a bool (H, W) array, materializing zeros when absent."""
        w, h = self.image_size
        if self.gt_mask is None:
            return np.zeros((h, w), dtype=bool)
        return self.gt_mask.astype(bool)

    def validate(self) -> None:
        if self.split not in (SPLIT_TRAIN, SPLIT_TEST):
            raise ArchiveError(f"record {self.id!r}: bad split {self.split!r}")
        if self.gt_label not in (LABEL_NORMAL, LABEL_ABNORMAL):
            raise ArchiveError(f"record {self.id!r}: bad gt_label {self.gt_label!r}")
        if self.split == SPLIT_TRAIN and self.gt_label != LABEL_NORMAL:
            raise ArchiveError(f"record {self.id!r}: train records must be normal")
        if self.semantic.ndim != 1:
            raise ArchiveError(f"record {self.id!r}: semantic must be a vector")
        if self.patches.ndim != 3:
            raise ArchiveError(f"record {self.id!r}: patches must be (grid_h, grid_w, dim)")
        if self.gt_label == LABEL_ABNORMAL and self.gt_mask is None:
            raise ArchiveError(f"record {self.id!r}: abnormal record lacks gt_mask")
        if self.gt_mask is not None:
            w, h = self.image_size
            if self.gt_mask.shape != (h, w):
                raise ArchiveError(
                    f"record {self.id!r}: gt_mask shape {self.gt_mask.shape} "
                    f"!= image size ({h}, {w})"
                )
            if self.gt_label == LABEL_NORMAL and self.gt_mask.any():
                raise ArchiveError(f"record {self.id!r}: normal record has nonzero mask")


@dataclass
class FeatureArchive:
    """Validated, immutable-by-convention collection of image records."""

    manifest: list[ImageRecord]
    semantic_dim: int
    patch_dim: int
    patch_grid: PatchGrid
    meta: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.semantic_dim < 1 or self.patch_dim < 1:
            raise ArchiveError("feature dimensions must be positive")
        seen: set[str] = set()
        for rec in self.manifest:
            rec.validate()
            if rec.id in seen:
                raise ArchiveError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)
            if rec.semantic.shape != (self.semantic_dim,):
                raise ArchiveError(
                    f"record {rec.id!r}: semantic shape {rec.semantic.shape} "
                    f"!= ({self.semantic_dim},)"
                )
            expect = (self.patch_grid.grid_h, self.patch_grid.grid_w, self.patch_dim)
            if rec.patches.shape != expect:
                raise ArchiveError(
                    f"record {rec.id!r}: patch shape {rec.patches.shape} != {expect}"
                )

    def records(self, split: Optional[str] = None) -> list[ImageRecord]:
        if split is None:
            return list(self.manifest)
        return [r for r in self.manifest if r.split == split]

    def train_records(self) -> list[ImageRecord]:
        return self.records(SPLIT_TRAIN)

    def test_records(self) -> list[ImageRecord]:
        return self.records(SPLIT_TEST)


# ---------------------------------------------------------------------------
# Mask run-length encoding (row-major, runs alternate starting with zeros)

def mask_to_rle(mask: np.ndarray) -> dict:
    """Encode a binary (H, W) mask as alternating run lengths.

    ``counts[0]`` is the length of the leading zero run (may be 0); runs then
    alternate one/zero over the row-major flattened mask.
    """
    m = np.asarray(mask).astype(bool).ravel(order="C")
    counts: list[int] = []
    if m.size == 0:
        return {"size": list(mask.shape), "counts": counts}
    changes = np.flatnonzero(np.diff(m.astype(np.int8)))
    edges = np.concatenate(([0], changes + 1, [m.size]))
    runs = np.diff(edges).tolist()
    if m[0]:
        counts.append(0)
    counts.extend(int(r) for r in runs)
    return {"size": [int(mask.shape[0]), int(mask.shape[1])], "counts": counts}


def rle_to_mask(rle: dict) -> np.ndarray:
    h, w = int(rle["size"][0]), int(rle["size"][1])
    counts = rle["counts"]
    flat = np.zeros(h * w, dtype=bool)
    pos = 0
    val = False
    for run in counts:
        run = int(run)
        if val:
            flat[pos : pos + run] = True
        pos += run
        val = not val
    if pos != h * w:
        raise ArchiveError(f"RLE covers {pos} pixels, mask has {h * w}")
    return flat.reshape(h, w)


# ---------------------------------------------------------------------------
# Blob codec: HCFS | u8 version | u8 rank | u16 reserved | u32 dims[rank] | f32 payload

def write_blob(path: Path, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array, dtype=np.float32)
    header = BLOB_MAGIC + struct.pack("<BBH", BLOB_VERSION, arr.ndim, 0)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    with open(path, "wb") as f:
        f.write(header)
        f.write(arr.tobytes(order="C"))


def read_blob(path: Path) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != BLOB_MAGIC:
            raise ArchiveError(f"{path.name}: bad blob magic {magic!r}")
        try:
            version, rank, _ = struct.unpack("<BBH", f.read(4))
            if version != BLOB_VERSION:
                raise ArchiveError(f"{path.name}: unsupported blob version {version}")
            dims = struct.unpack(f"<{rank}I", f.read(4 * rank))
        except struct.error as e:
            raise ArchiveError(f"{path.name}: truncated blob header ({e})") from e
        payload = f.read()
    count = int(np.prod(dims)) if rank else 1
    if len(payload) != count * 4:
        raise ArchiveError(
            f"{path.name}: payload is {len(payload)} bytes, "
            f"expected {count * 4} for dims {dims}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()


# ---------------------------------------------------------------------------
# Archive read/write

def write_archive(archive: FeatureArchive, path: str | Path) -> None:
    """Write an archive directory; refuses invalid archives before any I/O."""
    archive.validate()
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    (root / "blobs").mkdir(exist_ok=True)
    records_json = []
    for rec in archive.manifest:
        sem_name = f"blobs/{rec.id}.sem"
        pat_name = f"blobs/{rec.id}.pat"
        write_blob(root / sem_name, rec.semantic)
        write_blob(root / pat_name, rec.patches)
        records_json.append(
            {
                "id": rec.id,
                "split": rec.split,
                "class_label": rec.class_label,
                "gt_label": rec.gt_label,
                "mask_rle": None if rec.gt_mask is None else mask_to_rle(rec.gt_mask),
                "image_size": [int(rec.image_size[0]), int(rec.image_size[1])],
                "semantic_blob": sem_name,
                "patch_blob": pat_name,
            }
        )
    manifest = {
        "format": "feature-archive",
        "version": 1,
        "semantic_dim": archive.semantic_dim,
        "patch_dim": archive.patch_dim,
        "patch_grid": archive.patch_grid.to_json(),
        "meta": archive.meta,
        "records": records_json,
    }
    with open(root / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)


def read_archive(path: str | Path) -> FeatureArchive:
    """Load and validate an archive directory."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise ArchiveError(f"missing manifest: {manifest_path}")
    with open(manifest_path) as f:
        manifest = json.load(f)
    if manifest.get("format") != "feature-archive":
        raise ArchiveError(f"{manifest_path}: not a feature archive")
    grid = PatchGrid.from_json(manifest["patch_grid"])
    records = []
    for rj in manifest["records"]:
        rid = rj["id"]
        semantic = read_blob(root / rj["semantic_blob"])
        patches = read_blob(root / rj["patch_blob"])
        if semantic.ndim != 1:
            raise ArchiveError(f"record {rid!r}: semantic blob has rank {semantic.ndim}")
        if patches.ndim != 3:
            raise ArchiveError(f"record {rid!r}: patch blob has rank {patches.ndim}")
        mask = None if rj["mask_rle"] is None else rle_to_mask(rj["mask_rle"])
        records.append(
            ImageRecord(
                id=rid,
                split=rj["split"],
                class_label=rj["class_label"],
                gt_label=rj["gt_label"],
                gt_mask=mask,
                semantic=semantic,
                patches=patches,
                image_size=(int(rj["image_size"][0]), int(rj["image_size"][1])),
            )
        )
    archive = FeatureArchive(
        manifest=records,
        semantic_dim=int(manifest["semantic_dim"]),
        patch_dim=int(manifest["patch_dim"]),
        patch_grid=grid,
        meta=manifest.get("meta", {}),
    )
    archive.validate()
    return archive
