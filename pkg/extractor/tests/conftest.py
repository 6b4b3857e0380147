import numpy as np
import pytest
from PIL import Image


def _write_image(path, seed, size=(48, 48), blob=None):
    rng = np.random.default_rng(seed)
    arr = rng.integers(0, 255, size=(size[1], size[0], 3), dtype=np.uint8)
    if blob is not None:
        x, y, w, h = blob
        arr[y : y + h, x : x + w] = [255, 32, 32]
    Image.fromarray(arr).save(path)


@pytest.fixture(scope="session")
def fake_dataset(tmp_path_factory):
    """Two-class MVTecAD-style tree: train/good, test/good, test/scratch + masks."""
    root = tmp_path_factory.mktemp("dataset")
    seed = 0
    for cls in ("widget", "gadget"):
        (root / cls / "train" / "good").mkdir(parents=True)
        (root / cls / "test" / "good").mkdir(parents=True)
        (root / cls / "test" / "scratch").mkdir(parents=True)
        (root / cls / "ground_truth" / "scratch").mkdir(parents=True)
        for i in range(3):
            _write_image(root / cls / "train" / "good" / f"{i:03d}.png", seed)
            seed += 1
        for i in range(2):
            _write_image(root / cls / "test" / "good" / f"{i:03d}.png", seed)
            seed += 1
        for i in range(2):
            blob = (8 + 4 * i, 10, 12, 9)
            _write_image(root / cls / "test" / "scratch" / f"{i:03d}.png", seed, blob=blob)
            seed += 1
            mask = np.zeros((48, 48), dtype=np.uint8)
            x, y, w, h = blob
            mask[y : y + h, x : x + w] = 255
            Image.fromarray(mask).save(
                root / cls / "ground_truth" / "scratch" / f"{i:03d}_mask.png"
            )
    return root
