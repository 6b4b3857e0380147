import numpy as np
import pytest

from clusterbank.patches import (
    LayerMap,
    aggregate_window,
    merge_layers,
    patches_from_layers,
    resize_bilinear_map,
)


def brute_window_mean(tensor, w=3, h=3):
    """Count-normalized zero-padded window mean by explicit loops."""
    hf, wf, cf = tensor.shape
    ph, pw = (h - 1) // 2, (w - 1) // 2
    out = np.zeros_like(tensor, dtype=float)
    for i in range(hf):
        for j in range(wf):
            acc = np.zeros(cf)
            cnt = 0
            for di in range(-ph, ph + 1):
                for dj in range(-pw, pw + 1):
                    ii, jj = i + di, j + dj
                    if 0 <= ii < hf and 0 <= jj < wf:
                        acc += tensor[ii, jj]
                        cnt += 1
            out[i, j] = acc / cnt
    return out


class TestAggregateWindow:
    def test_constant_stays_constant(self):
        m = LayerMap(0, np.full((5, 7, 2), 3.25, dtype=np.float32))
        out = aggregate_window(m)
        assert np.allclose(out.tensor, 3.25)

    def test_grid_preserved_64(self):
        m = LayerMap(0, np.random.default_rng(0).normal(size=(64, 64, 3)).astype(np.float32))
        out = aggregate_window(m, w=3, h=3, stride=1, p=1)
        # W_out = W + 2p - w + 1 = 64 + 2 - 3 + 1 = 64
        assert out.tensor.shape == (64, 64, 3)

    def test_one_by_one_identity(self):
        m = LayerMap(0, np.array([[[2.0, -1.0]]], dtype=np.float32))
        out = aggregate_window(m)
        assert np.allclose(out.tensor, m.tensor)

    def test_even_window_rejected(self):
        m = LayerMap(0, np.zeros((4, 4, 1), dtype=np.float32))
        with pytest.raises(ValueError, match="odd"):
            aggregate_window(m, w=4, h=4, p=1)

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(5)
        t = rng.normal(size=(6, 9, 4))
        out = aggregate_window(LayerMap(0, t.astype(np.float32))).tensor
        assert np.allclose(out, brute_window_mean(t), atol=1e-5)

    def test_translation_equivariance_interior(self):
        rng = np.random.default_rng(6)
        t = rng.normal(size=(10, 10, 2))
        shifted = np.roll(t, 1, axis=1)
        a = aggregate_window(LayerMap(0, t.astype(np.float32))).tensor
        b = aggregate_window(LayerMap(0, shifted.astype(np.float32))).tensor
        # away from the wrapped column and borders, output shifts with input
        assert np.allclose(a[1:-1, 2:-2], b[1:-1, 3:-1], atol=1e-6)


class TestMergeLayers:
    def test_single_layer_identity(self):
        t = np.random.default_rng(1).normal(size=(4, 4, 3)).astype(np.float32)
        merged = merge_layers([LayerMap(0, t)])
        assert np.array_equal(merged.tensor, t)

    def test_shape_contract(self):
        a = LayerMap(0, np.zeros((32, 32, 5), dtype=np.float32))
        b = LayerMap(1, np.zeros((16, 16, 7), dtype=np.float32))
        merged = merge_layers([a, b])
        assert merged.tensor.shape == (32, 32, 12)
        assert merged.provenance.grid_w == 32 and merged.provenance.grid_h == 32

    def test_constant_coarse_layer_constant_upsample(self):
        fine = LayerMap(0, np.random.default_rng(2).normal(size=(8, 8, 1)).astype(np.float32))
        coarse = LayerMap(1, np.full((4, 4, 2), 1.5, dtype=np.float32))
        merged = merge_layers([fine, coarse])
        assert np.allclose(merged.tensor[:, :, 1:], 1.5)

    def test_channel_order_is_layer_order(self):
        a = LayerMap(0, np.full((2, 2, 1), 1.0, dtype=np.float32))
        b = LayerMap(1, np.full((2, 2, 1), 2.0, dtype=np.float32))
        merged = merge_layers([a, b])
        assert np.allclose(merged.tensor[:, :, 0], 1.0)
        assert np.allclose(merged.tensor[:, :, 1], 2.0)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            merge_layers([])

    def test_resize_corner_alignment(self):
        # 2 -> 4 corner-aligned: positions 0, 1/3, 2/3, 1
        t = np.array([[[0.0], [1.0]], [[0.0], [1.0]]])
        out = resize_bilinear_map(t, 4, 4)
        expect = np.array([0, 1 / 3, 2 / 3, 1.0])
        for row in out[:, :, 0]:
            assert np.allclose(row, expect)


def test_full_pipeline_patch_count():
    rng = np.random.default_rng(7)
    layers = [
        LayerMap(2, rng.normal(size=(16, 16, 4)).astype(np.float32)),
        LayerMap(3, rng.normal(size=(8, 8, 6)).astype(np.float32)),
    ]
    pt = patches_from_layers(layers)
    assert pt.tensor.shape == (16, 16, 10)
    # total patches per image equals the stride-1 formula on the reference grid
    assert pt.provenance.grid_h * pt.provenance.grid_w == (16 + 2 - 3 + 1) ** 2
