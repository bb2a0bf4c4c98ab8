import numpy as np
import pytest

from revex.errors import ParameterError
from revex.explainers import RegionRelevance, SaliencyVolume
from revex.segmentation import grid_3d
from revex.tensor import VideoTensor
from revex.visualization import (RenderConfig, boundary_overlay, colormap_rgb,
                                 composite, contact_sheet, filter_regions,
                                 normalize_saliency)


def vol(arr):
    return SaliencyVolume(np.asarray(arr, dtype=np.float32))


class TestNormalizeSaliency:

    def test_clamp_then_stretch(self):
        v = vol(np.linspace(-1, 1, 8).reshape(2, 2, 2))
        out = normalize_saliency(v, RenderConfig())
        assert out.data.min() == 0.0
        assert out.data.max() == 1.0

    def test_constant_maps_to_zero(self):
        out = normalize_saliency(vol(np.full((2, 2, 2), 3.0)))
        np.testing.assert_array_equal(out.data, 0.0)

    def test_affine_map_values(self):
        out = normalize_saliency(vol(np.array([0.2, 0.4, 0.8]).reshape(1, 1, 3)))
        np.testing.assert_allclose(out.data.ravel(), [0.0, 1.0 / 3.0, 1.0],
                                   atol=1e-6)

    def test_argmax_preserved_by_stretch(self):
        rng = np.random.default_rng(0)
        arr = rng.random((3, 4, 4)).astype(np.float32)
        out = normalize_saliency(vol(arr), RenderConfig(clamp_negative=False))
        assert np.argmax(out.data) == np.argmax(arr)

    def test_no_clamp_keeps_negative_mass_at_zero(self):
        v = vol(np.array([-1.0, 0.0, 1.0]).reshape(1, 1, 3))
        out = normalize_saliency(v, RenderConfig(clamp_negative=False))
        np.testing.assert_allclose(out.data.ravel(), [0.0, 0.5, 1.0], atol=1e-6)


class TestFilterRegions:

    def rel(self, values):
        return RegionRelevance(np.asarray(values, dtype=float), "lime")

    def test_top_n_identity_when_n_is_r(self):
        r = self.rel([0.5, 0.3, 0.2])
        out = filter_regions(r, RenderConfig(top_n=3))
        np.testing.assert_array_equal(out.values, r.values)

    def test_top_n_keeps_largest(self):
        out = filter_regions(self.rel([0.1, 0.7, 0.3]), RenderConfig(top_n=1))
        np.testing.assert_allclose(out.values, [0.0, 0.7, 0.0])

    def test_cumulative_cutoff_example(self):
        out = filter_regions(self.rel([0.5, 0.3, 0.2]),
                             RenderConfig(cumulative_cutoff=0.8))
        np.testing.assert_allclose(out.values, [0.5, 0.3, 0.0])

    def test_min_relevance_above_max_zeroes_all(self):
        out = filter_regions(self.rel([0.5, 0.3]), RenderConfig(min_relevance=0.9))
        np.testing.assert_array_equal(out.values, 0.0)

    def test_never_increases_values(self):
        rng = np.random.default_rng(1)
        values = rng.normal(size=10)
        out = filter_regions(self.rel(values), RenderConfig(top_n=4))
        assert (out.values <= np.maximum(values, 0.0) + 1e-12).all()
        assert (np.count_nonzero(out.values) <= 4)

    def test_exclusive_selection_rules(self):
        with pytest.raises(ParameterError):
            RenderConfig(top_n=2, min_relevance=0.1)


class TestComposite:

    def make_video(self):
        rng = np.random.default_rng(2)
        return VideoTensor(rng.random((2, 4, 4, 3), dtype=np.float32))

    def test_zero_saliency_is_grayscale(self):
        v = self.make_video()
        out = composite(v, vol(np.zeros((2, 4, 4))), RenderConfig(alpha=0.8))
        lum = v.data @ np.array([0.299, 0.587, 0.114], dtype=np.float32)
        np.testing.assert_allclose(out.data, np.repeat(lum[..., None], 3, -1),
                                   atol=1e-6)

    def test_alpha_zero_is_grayscale(self):
        v = self.make_video()
        rng = np.random.default_rng(3)
        s = vol(rng.random((2, 4, 4)))
        out = composite(v, s, RenderConfig(alpha=0.0))
        ref = composite(v, vol(np.zeros((2, 4, 4))), RenderConfig(alpha=0.9))
        np.testing.assert_allclose(out.data, ref.data, atol=1e-6)

    def test_full_saliency_full_alpha_pure_colormap(self):
        v = self.make_video()
        out = composite(v, vol(np.ones((2, 4, 4))), RenderConfig(alpha=1.0))
        top = colormap_rgb(np.ones(1))[0]
        np.testing.assert_allclose(out.data.reshape(-1, 3),
                                   np.tile(top, (32, 1)), atol=1e-6)

    def test_output_in_range(self):
        v = self.make_video()
        rng = np.random.default_rng(4)
        out = composite(v, vol(rng.random((2, 4, 4))), RenderConfig())
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0

    def test_unnormalized_saliency_rejected(self):
        v = self.make_video()
        with pytest.raises(ParameterError):
            composite(v, vol(np.full((2, 4, 4), 1.5)), RenderConfig())


class TestColormaps:

    def test_lut_shape_and_range(self):
        for name in ("heat", "mono"):
            rgb = colormap_rgb(np.linspace(0, 1, 7), name)
            assert rgb.shape == (7, 3)
            assert rgb.min() >= 0.0 and rgb.max() <= 1.0

    def test_heat_runs_cold_to_warm(self):
        cold = colormap_rgb(np.zeros(1))[0]
        warm = colormap_rgb(np.ones(1))[0]
        assert cold[2] > cold[0]  # blue end
        assert warm[0] > warm[2]  # red end


class TestOverlaysAndSheets:

    def test_boundary_overlay_marks_edges(self):
        v = VideoTensor(np.zeros((2, 4, 4, 3), dtype=np.float32))
        seg = grid_3d(2, 4, 4, 1, 2, 2)
        out = boundary_overlay(v, seg)
        assert (out.data[0, 1, 1] == np.array([1.0, 1.0, 0.0],
                                              dtype=np.float32)).all()
        assert (out.data[0, 0, 0] == 0.0).all()

    def test_contact_sheet_written(self, tmp_path):
        rng = np.random.default_rng(5)
        v = VideoTensor(rng.random((3, 4, 5, 3), dtype=np.float32))
        path = tmp_path / "sheet.png"
        contact_sheet(v, path)
        from PIL import Image
        img = np.asarray(Image.open(path))
        assert img.shape == (4, 15, 3)
