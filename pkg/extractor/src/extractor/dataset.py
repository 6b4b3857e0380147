"""MVTecAD-style dataset walker.

Expected layout under the root (one directory per class)::

    <class>/train/good/*.png
    <class>/test/<defect>/*.png          # "good" or a defect name
    <class>/ground_truth/<defect>/<stem>_mask.png

Abnormal test images must have a matching ground-truth mask; corrupt or
unreadable images are skipped and reported.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class ImageEntry:
    record_id: str
    class_name: str
    split: str  # train | test
    defect: str  # "good" for normals
    image_path: Path
    mask_path: Optional[Path]

    @property
    def is_abnormal(self) -> bool:
        return self.defect != "good"


def _images_in(directory: Path) -> list[Path]:
    return sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


def _find_mask(class_dir: Path, defect: str, stem: str) -> Optional[Path]:
    gt_dir = class_dir / "ground_truth" / defect
    if not gt_dir.is_dir():
        return None
    for candidate in (f"{stem}_mask.png", f"{stem}.png"):
        p = gt_dir / candidate
        if p.is_file():
            return p
    return None


def scan_dataset(root: str | Path, classes: Optional[list[str]] = None) -> list[ImageEntry]:
    """Enumerate every image with its split, class, defect, and mask."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    class_dirs = sorted(
        d for d in root.iterdir() if d.is_dir() and (d / "train").is_dir()
    )
    if classes is not None:
        wanted = set(classes)
        class_dirs = [d for d in class_dirs if d.name in wanted]
        missing = wanted - {d.name for d in class_dirs}
        if missing:
            raise DatasetError(f"classes not found under {root}: {sorted(missing)}")
    if not class_dirs:
        raise DatasetError(f"no class directories with a train/ split under {root}")

    entries: list[ImageEntry] = []
    for class_dir in class_dirs:
        cls = class_dir.name
        train_good = class_dir / "train" / "good"
        if not train_good.is_dir():
            raise DatasetError(f"{cls}: missing train/good directory")
        for img in _images_in(train_good):
            entries.append(
                ImageEntry(
                    record_id=f"{cls}__train__good__{img.stem}",
                    class_name=cls,
                    split="train",
                    defect="good",
                    image_path=img,
                    mask_path=None,
                )
            )
        test_dir = class_dir / "test"
        if not test_dir.is_dir():
            continue
        for defect_dir in sorted(d for d in test_dir.iterdir() if d.is_dir()):
            defect = defect_dir.name
            for img in _images_in(defect_dir):
                mask = None
                if defect != "good":
                    mask = _find_mask(class_dir, defect, img.stem)
                    if mask is None:
                        raise DatasetError(
                            f"{cls}/test/{defect}/{img.name}: abnormal image "
                            f"without a ground-truth mask"
                        )
                entries.append(
                    ImageEntry(
                        record_id=f"{cls}__test__{defect}__{img.stem}",
                        class_name=cls,
                        split="test",
                        defect=defect,
                        image_path=img,
                        mask_path=mask,
                    )
                )
    return entries
