import json

import numpy as np
import pytest

from perfkit import preprocess
from perfkit.preprocess import PreprocessConfig
from perfkit.volume import Grid3, Volume3

from _util import make_volume


class TestPreprocessConfig:
    def test_defaults(self):
        cfg = PreprocessConfig()
        assert cfg.target_spacing == (1.0, 1.0, 3.0)
        assert cfg.crop_size == (96, 96)
        assert cfg.normalize is True

    def test_json_round_trip(self, tmp_path):
        cfg = PreprocessConfig(target_spacing=(2.0, 2.0, 4.0), crop_size=(64, 64), normalize=False)
        path = tmp_path / "cfg.json"
        cfg.to_json(path)
        assert PreprocessConfig.from_json(path) == cfg

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"target_spacing": [1, 1, 3], "cropsize": [96, 96]}))
        with pytest.raises(ValueError):
            PreprocessConfig.from_json(path)

    def test_validation(self):
        with pytest.raises(ValueError):
            PreprocessConfig(target_spacing=(0.0, 1.0, 3.0))
        with pytest.raises(ValueError):
            PreprocessConfig(crop_size=(0, 96))


class TestResample:
    def test_identity_when_spacing_matches(self):
        rng = np.random.default_rng(0)
        v = make_volume(rng.uniform(size=(5, 4, 3)), spacing=(1.0, 1.5, 3.0), origin=(2.0, 1.0, 0.0))
        out = preprocess.resample_trilinear(v, (1.0, 1.5, 3.0))
        assert out.grid.dims == v.grid.dims
        np.testing.assert_array_equal(out.voxels, v.voxels)

    def test_doubling_1d_oracle(self):
        # halving the spacing along x doubles the sample count; interior
        # outputs interpolate linearly, the tail clamps to the edge voxel
        v = make_volume(np.array([10.0, 20.0, 40.0]).reshape(3, 1, 1), spacing=(2.0, 1.0, 1.0))
        out = preprocess.resample_trilinear(v, (1.0, 1.0, 1.0))
        assert out.grid.dims == (6, 1, 1)
        np.testing.assert_allclose(out.voxels[:, 0, 0], [10.0, 15.0, 20.0, 30.0, 40.0, 40.0])

    def test_coarsening_dims(self):
        v = make_volume(np.zeros((10, 10, 10)), spacing=(1.0, 1.0, 1.0))
        out = preprocess.resample_trilinear(v, (3.0, 3.0, 3.0))
        # 10 voxels x 1mm = 10mm span -> ceil(10/3) = 4 output voxels
        assert out.grid.dims == (4, 4, 4)
        assert out.grid.spacing == (3.0, 3.0, 3.0)

    def test_origin_preserved(self):
        v = make_volume(np.zeros((4, 4, 4)), spacing=(2.0, 2.0, 2.0), origin=(7.0, -1.0, 3.0))
        out = preprocess.resample_trilinear(v, (1.0, 1.0, 1.0))
        assert out.grid.origin == (7.0, -1.0, 3.0)

    def test_affine_field_reproduced(self):
        # trilinear interpolation is exact on affine functions away from clamping
        nx, ny, nz = 9, 8, 6
        sx, sy, sz = 2.0, 1.5, 2.5
        ox, oy, oz = 4.0, -3.0, 1.0
        i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
        x, y, z = ox + i * sx, oy + j * sy, oz + k * sz
        v = Volume3(Grid3((nx, ny, nz), (sx, sy, sz), (ox, oy, oz)), 2 * x + 3 * y - z)
        out = preprocess.resample_trilinear(v, (1.0, 1.0, 3.0))
        mx, my, mz = out.grid.dims
        io, jo, ko = np.meshgrid(np.arange(mx), np.arange(my), np.arange(mz), indexing="ij")
        expected = 2 * (ox + io * 1.0) + 3 * (oy + jo * 1.0) - (oz + ko * 3.0)
        interior = (
            (io * (1.0 / sx) <= nx - 1)
            & (jo * (1.0 / sy) <= ny - 1)
            & (ko * (3.0 / sz) <= nz - 1)
        )
        np.testing.assert_allclose(out.voxels[interior], expected[interior], atol=1e-5)


class TestCenterCrop:
    def test_larger_input_cropped(self):
        data = np.zeros((192, 192, 3))
        data[48, 48, 0] = 1.0    # first retained corner
        data[143, 143, 2] = 2.0  # last retained corner
        data[47, 100, 0] = 9.0   # just outside
        v = make_volume(data, spacing=(1.0, 1.0, 3.0), origin=(10.0, 20.0, 0.0))
        out = preprocess.center_crop(v, (96, 96))
        assert out.grid.dims == (96, 96, 3)
        assert out.voxels[0, 0, 0] == 1.0
        assert out.voxels[95, 95, 2] == 2.0
        assert 9.0 not in out.voxels
        assert out.grid.origin == (10.0 + 48.0, 20.0 + 48.0, 0.0)

    def test_exact_size_is_identity(self):
        rng = np.random.default_rng(1)
        v = make_volume(rng.uniform(size=(96, 96, 2)))
        out = preprocess.center_crop(v, (96, 96))
        np.testing.assert_array_equal(out.voxels, v.voxels)
        assert out.grid == v.grid

    def test_smaller_input_padded(self):
        v = make_volume(np.ones((90, 90, 2)), spacing=(1.0, 1.0, 3.0), origin=(0.0, 0.0, 0.0))
        out = preprocess.center_crop(v, (96, 96))
        assert out.grid.dims == (96, 96, 2)
        # 3 zero planes at each side
        assert out.voxels[:3].sum() == 0 and out.voxels[-3:].sum() == 0
        assert out.voxels[3:-3, 3:-3].min() == 1.0
        assert out.grid.origin == (-3.0, -3.0, 0.0)

    def test_odd_remainder_splits_low_first(self):
        v = make_volume(np.ones((5, 96, 1)))
        out = preprocess.center_crop(v, (96, 96))
        # 91 missing in x: 45 low, 46 high
        assert out.voxels[44, 0, 0] == 0.0
        assert out.voxels[45, 0, 0] == 1.0
        assert out.voxels[49, 0, 0] == 1.0
        assert out.voxels[50, 0, 0] == 0.0
        assert out.grid.origin[0] == -45.0

    def test_z_untouched(self):
        v = make_volume(np.ones((96, 96, 7)))
        assert preprocess.center_crop(v, (96, 96)).grid.dims[2] == 7


class TestNormalize:
    def test_range_and_extremes(self):
        v = make_volume(np.array([[-5.0, 0.0], [5.0, 15.0]]).reshape(2, 2, 1))
        out, degenerate = preprocess.normalize_minmax(v)
        assert not degenerate
        assert out.voxels.min() == 0.0
        assert out.voxels.max() == 1.0
        np.testing.assert_allclose(out.voxels[:, :, 0], [[0.0, 0.25], [0.5, 1.0]])

    def test_idempotent(self):
        rng = np.random.default_rng(2)
        v = make_volume(rng.uniform(-10, 10, size=(6, 5, 4)))
        once, _ = preprocess.normalize_minmax(v)
        twice, _ = preprocess.normalize_minmax(once)
        np.testing.assert_array_equal(once.voxels, twice.voxels)

    def test_constant_volume_degenerate(self):
        v = make_volume(np.full((3, 3, 3), 42.0))
        out, degenerate = preprocess.normalize_minmax(v)
        assert degenerate
        np.testing.assert_array_equal(out.voxels, 0.0)


class TestAssembleChannels:
    def test_stacks_in_order(self):
        a = make_volume(np.zeros((4, 4, 2)))
        b = make_volume(np.ones((4, 4, 2)))
        stack = preprocess.assemble_channels([a, b], names=("t2", "adc"))
        assert stack.channels.shape == (2, 4, 4, 2)
        np.testing.assert_array_equal(stack.channels[0], 0.0)
        np.testing.assert_array_equal(stack.channels[1], 1.0)
        assert stack.names == ("t2", "adc")

    def test_needs_two_modalities(self):
        with pytest.raises(ValueError):
            preprocess.assemble_channels([make_volume(np.zeros((4, 4, 2)))])

    def test_grid_mismatch_rejected(self):
        a = make_volume(np.zeros((4, 4, 2)))
        b = make_volume(np.zeros((4, 4, 2)), origin=(5.0, 0.0, 0.0))
        with pytest.raises(ValueError):
            preprocess.assemble_channels([a, b])


class TestPreprocessVolume:
    def test_composes_stages(self):
        rng = np.random.default_rng(3)
        v = make_volume(rng.uniform(0, 900, size=(48, 40, 5)), spacing=(2.0, 2.0, 3.0))
        out, degenerate = preprocess.preprocess_volume(v, PreprocessConfig())
        assert not degenerate
        assert out.grid.dims == (96, 96, 5)
        assert out.grid.spacing == (1.0, 1.0, 3.0)
        assert out.voxels.min() >= 0.0 and out.voxels.max() <= 1.0

    def test_normalize_can_be_disabled(self):
        v = make_volume(np.full((96, 96, 2), 500.0))
        out, degenerate = preprocess.preprocess_volume(v, PreprocessConfig(normalize=False))
        assert not degenerate
        assert out.voxels.max() == 500.0
