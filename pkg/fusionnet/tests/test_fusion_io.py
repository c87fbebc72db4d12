"""Volume I/O codec and slice dataset assembly."""

import gzip

import numpy as np
import pytest
import torch

from fusionnet import (
    SliceDataset,
    load_slice_dataset,
    normalize_volume,
    read_volume,
    write_volume,
)


class TestCodec:
    def test_3d_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        data = rng.normal(size=(7, 5, 3)).astype(np.float32)
        path = tmp_path / "vol.nii.gz"
        write_volume(data, path, spacing=(0.5, 0.5, 3.0), origin=(10.0, -4.0, 2.5))
        back = read_volume(path)
        assert np.array_equal(back.data, data)
        assert back.spacing == (0.5, 0.5, 3.0)
        assert back.origin == (10.0, -4.0, 2.5)

    def test_4d_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        data = rng.random((4, 4, 2, 6)).astype(np.float32)
        path = tmp_path / "prob.nii.gz"
        write_volume(data, path)
        back = read_volume(path)
        assert back.data.shape == (4, 4, 2, 6)
        assert np.array_equal(back.data, data)

    def test_uncompressed_round_trip(self, tmp_path):
        data = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
        path = tmp_path / "vol.nii"
        write_volume(data, path)
        raw = path.read_bytes()
        assert raw[:2] != b"\x1f\x8b"
        assert np.array_equal(read_volume(path).data, data)

    def test_write_is_deterministic(self, tmp_path):
        data = np.ones((4, 4, 4), dtype=np.float32)
        write_volume(data, tmp_path / "a.nii.gz")
        write_volume(data, tmp_path / "b.nii.gz")
        assert (tmp_path / "a.nii.gz").read_bytes() == (tmp_path / "b.nii.gz").read_bytes()

    def test_rejects_wrong_rank(self, tmp_path):
        with pytest.raises(ValueError):
            write_volume(np.zeros((4, 4), dtype=np.float32), tmp_path / "flat.nii")

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "vol.nii"
        write_volume(np.zeros((2, 2, 2), dtype=np.float32), path)
        raw = bytearray(path.read_bytes())
        raw[344:348] = b"oops"
        path.write_bytes(bytes(raw))
        with pytest.raises(ValueError, match="NIfTI"):
            read_volume(path)

    def test_rejects_truncated(self, tmp_path):
        path = tmp_path / "vol.nii"
        path.write_bytes(b"\x00" * 100)
        with pytest.raises(ValueError):
            read_volume(path)

    def test_scaled_integer_volume(self, tmp_path):
        # hand-build an int16 file with scl_slope/inter to hit the scaling path
        path = tmp_path / "scaled.nii.gz"
        base = np.zeros((2, 2, 2), dtype=np.float32)
        write_volume(base, tmp_path / "tpl.nii")
        raw = bytearray((tmp_path / "tpl.nii").read_bytes())
        import struct

        struct.pack_into("<2h", raw, 70, 4, 16)  # int16
        struct.pack_into("<2f", raw, 112, 2.0, 10.0)  # slope, inter
        values = np.arange(8, dtype="<i2")
        payload = bytes(raw[:352]) + values.tobytes()
        path.write_bytes(gzip.compress(payload))
        back = read_volume(path)
        expected = (np.arange(8).reshape((2, 2, 2), order="F") * 2.0 + 10.0)
        assert np.array_equal(back.data, expected)


class TestNormalize:
    def test_full_range(self):
        vol = np.array([[[2.0, 4.0]], [[6.0, 10.0]]])
        out = normalize_volume(vol)
        assert out.min() == 0.0
        assert out.max() == 1.0
        assert out.dtype == np.float32

    def test_constant_volume_maps_to_zero(self):
        out = normalize_volume(np.full((3, 3, 3), 7.5))
        assert np.all(out == 0.0)


class TestSliceDataset:
    def test_shapes_and_one_hot(self):
        inputs = torch.zeros(3, 2, 16, 16)
        labels = torch.zeros(3, 16, 16, dtype=torch.long)
        labels[0, :8] = 4
        ds = SliceDataset(inputs, labels)
        assert len(ds) == 3
        x, t = ds[0]
        assert x.shape == (2, 16, 16)
        assert t.shape == (6, 16, 16)
        assert torch.all(t.sum(dim=0) == 1.0)
        assert torch.all(t[4, :8] == 1.0)

    def test_rejects_label_shape_mismatch(self):
        with pytest.raises(ValueError):
            SliceDataset(torch.zeros(2, 1, 16, 16), torch.zeros(2, 8, 8, dtype=torch.long))

    def test_rejects_out_of_range_labels(self):
        labels = torch.full((1, 8, 8), 6, dtype=torch.long)
        with pytest.raises(ValueError):
            SliceDataset(torch.zeros(1, 1, 8, 8), labels)


class TestLoadSliceDataset:
    def write_grid(self, tmp_path, name, data):
        path = tmp_path / name
        write_volume(data.astype(np.float32), path)
        return path

    def test_loads_and_normalizes(self, tmp_path):
        rng = np.random.default_rng(3)
        a = self.write_grid(tmp_path, "a.nii.gz", rng.normal(5.0, 2.0, (16, 16, 3)))
        b = self.write_grid(tmp_path, "b.nii.gz", rng.normal(0.0, 1.0, (16, 16, 3)))
        labels = np.zeros((16, 16, 3))
        labels[4:10, 4:10, 1] = 2
        lp = self.write_grid(tmp_path, "labels.nii.gz", labels)

        ds = load_slice_dataset([a, b], lp)
        assert len(ds) == 3
        assert ds.inputs.shape == (3, 2, 16, 16)
        assert float(ds.inputs.min()) >= 0.0
        assert float(ds.inputs.max()) <= 1.0
        assert set(ds.labels.unique().tolist()) == {0, 2}
        # slice 1 carries the labeled block
        assert int(ds.labels[1].sum()) == 2 * 36

    def test_rejects_single_modality(self, tmp_path):
        a = self.write_grid(tmp_path, "a.nii.gz", np.zeros((8, 8, 2)))
        lp = self.write_grid(tmp_path, "l.nii.gz", np.zeros((8, 8, 2)))
        with pytest.raises(ValueError):
            load_slice_dataset([a], lp)

    def test_rejects_grid_mismatch(self, tmp_path):
        a = self.write_grid(tmp_path, "a.nii.gz", np.zeros((8, 8, 2)))
        b = self.write_grid(tmp_path, "b.nii.gz", np.zeros((8, 8, 3)))
        lp = self.write_grid(tmp_path, "l.nii.gz", np.zeros((8, 8, 2)))
        with pytest.raises(ValueError):
            load_slice_dataset([a, b], lp)

    def test_rejects_label_grid_mismatch(self, tmp_path):
        a = self.write_grid(tmp_path, "a.nii.gz", np.zeros((8, 8, 2)))
        b = self.write_grid(tmp_path, "b.nii.gz", np.zeros((8, 8, 2)))
        lp = self.write_grid(tmp_path, "l.nii.gz", np.zeros((8, 8, 4)))
        with pytest.raises(ValueError):
            load_slice_dataset([a, b], lp)
