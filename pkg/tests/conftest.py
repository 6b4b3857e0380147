import numpy as np
import pytest

from clusterbank import CoresetConfig, separable_spec, synth_generate


@pytest.fixture(scope="session")
def two_class_archive():
    """Well-separated 2-class archive used by most pipeline tests."""
    spec = separable_spec(
        n_classes=2,
        margin=10.0,
        train_per_class=20,
        test_per_class=10,
        grid=(8, 8),
        image_size=(64, 64),
    )
    return synth_generate(spec, seed=11)


@pytest.fixture(scope="session")
def default_cfg():
    return CoresetConfig(ratio=0.10, seed=0)


def archive_equal(a, b) -> bool:
    """Bit-exact archive comparison, metadata and tensors."""
    if (a.semantic_dim, a.patch_dim, a.patch_grid) != (b.semantic_dim, b.patch_dim, b.patch_grid):
        return False
    if len(a.manifest) != len(b.manifest):
        return False
    for ra, rb in zip(a.manifest, b.manifest):
        if (ra.id, ra.split, ra.class_label, ra.gt_label, ra.image_size) != (
            rb.id,
            rb.split,
            rb.class_label,
            rb.gt_label,
            rb.image_size,
        ):
            return False
        if ra.semantic.tobytes() != rb.semantic.tobytes():
            return False
        if ra.patches.tobytes() != rb.patches.tobytes():
            return False
        ma, mb = ra.gt_mask, rb.gt_mask
        if (ma is None) != (mb is None):
            return False
        if ma is not None and not np.array_equal(ma, mb):
            return False
    return True
