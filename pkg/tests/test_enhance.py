import numpy as np
import pytest

from terrabench.enhance import StretchConfig, enhance_rgb, linear_stretch, percentile_clip
from terrabench.errors import BandMismatch, DegenerateDataWarning
from terrabench.raster import CrsId, GeoGrid, GeoTransform


def rgb_grid(data):
    return GeoGrid(np.asarray(data, dtype=np.uint8), GeoTransform(0, 0, 1, -1), CrsId.wgs84())


class TestPercentileClip:
    def test_hand_case_0_to_99(self):
        values = np.arange(100, dtype=np.float64)
        clipped, i_min, i_max = percentile_clip(values, StretchConfig(1.0, 99.0))
        assert i_min == pytest.approx(0.99)
        assert i_max == pytest.approx(98.01)
        assert clipped[0] == pytest.approx(0.99)
        assert clipped[-1] == pytest.approx(98.01)
        assert clipped[50] == pytest.approx(50.0)

    def test_constant_array_degenerate_band(self):
        values = np.full(64, 3.25)
        clipped, i_min, i_max = percentile_clip(values, StretchConfig(1.0, 99.0))
        assert i_min == i_max == 3.25
        assert np.array_equal(clipped, values)

    def test_full_band_is_identity(self):
        rng = np.random.default_rng(0)
        values = rng.standard_normal(500)
        clipped, _, _ = percentile_clip(values, StretchConfig(0.0, 100.0))
        assert np.allclose(clipped, values)

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            StretchConfig(99.0, 1.0)
        with pytest.raises(ValueError):
            StretchConfig(-1.0, 99.0)


class TestLinearStretch:
    def test_hand_case(self):
        out = linear_stretch(np.array([0.0, 50.0, 100.0]), 0.0, 100.0)
        # 50 -> 127.5 -> 128 with half-away-from-zero rounding
        assert out.tolist() == [0, 128, 255]

    def test_lower_bound_maps_to_zero(self):
        out = linear_stretch(np.full(16, 7.0), 7.0, 99.0)
        assert np.all(out == 0)

    def test_upper_bound_maps_to_255(self):
        out = linear_stretch(np.full(16, 99.0), 7.0, 99.0)
        assert np.all(out == 255)

    def test_degenerate_band_warns_and_zeroes(self):
        with pytest.warns(DegenerateDataWarning):
            out = linear_stretch(np.full(8, 5.0), 5.0, 5.0)
        assert np.all(out == 0)

    def test_monotone_inside_band(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            values = np.sort(rng.uniform(10, 20, 100))
            out = linear_stretch(values, 10.0, 20.0)
            assert np.all(np.diff(out.astype(int)) >= 0)


class TestEnhanceRgb:
    def test_full_range_flat_histogram_fixed_point(self):
        # with clipping disabled and the range already full, all three
        # stages are identities, so the image is an exact fixed point
        ramp = np.tile(np.arange(256, dtype=np.uint8), (256, 1))
        rgb = rgb_grid(np.stack([ramp, ramp.T, ramp[::-1]], axis=-1))
        out = enhance_rgb(rgb, StretchConfig(0.0, 100.0))
        assert np.abs(out.data.astype(int) - rgb.data.astype(int)).max() <= 1
        assert np.array_equal(out.data, rgb.data)

    def test_constant_image_warns_three_times(self):
        rgb = rgb_grid(np.full((8, 8, 3), 9, dtype=np.uint8))
        with pytest.warns(DegenerateDataWarning) as caught:
            out = enhance_rgb(rgb)
        assert np.all(out.data == 0)
        assert len([w for w in caught if issubclass(w.category, DegenerateDataWarning)]) == 3

    def test_output_spans_full_range(self):
        rng = np.random.default_rng(2)
        for seed in range(10):
            data = rng.integers(20, 200, (32, 32, 3)).astype(np.uint8)
            out = enhance_rgb(rgb_grid(data))
            for b in range(3):
                channel = out.band(b)
                assert channel.min() == 0
                assert channel.max() == 255

    def test_channel_independence(self):
        rng = np.random.default_rng(3)
        data = rng.integers(0, 256, (16, 16, 3)).astype(np.uint8)
        out = enhance_rgb(rgb_grid(data)).data
        permuted = enhance_rgb(rgb_grid(data[:, :, [2, 0, 1]])).data
        assert np.array_equal(permuted, out[:, :, [2, 0, 1]])

    def test_band_count_enforced(self):
        dem = GeoGrid(np.zeros((4, 4), dtype=np.float32), GeoTransform(0, 0, 1, -1), CrsId.wgs84())
        with pytest.raises(BandMismatch):
            enhance_rgb(dem)

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        data = rng.integers(0, 256, (16, 16, 3)).astype(np.uint8)
        a = enhance_rgb(rgb_grid(data)).data
        b = enhance_rgb(rgb_grid(data)).data
        assert np.array_equal(a, b)
