import numpy as np
import pytest

from revex.errors import FormatError, ParameterError
from revex.tensor import (BlurParams, VideoTensor, blur_volume, gaussian_blur_3d,
                          gaussian_kernel_1d, read_frames, read_tensor,
                          write_frames, write_tensor)

from oracles import dense_blur_3d


def rand_video(t=3, h=6, w=5, c=3, seed=0):
    rng = np.random.default_rng(seed)
    return VideoTensor(rng.random((t, h, w, c), dtype=np.float32))


class TestVideoTensor:

    def test_dims_and_props(self):
        v = rand_video(2, 4, 5, 1)
        assert (v.t, v.h, v.w, v.c) == (2, 4, 5, 1)

    def test_rejects_out_of_range(self):
        with pytest.raises(ParameterError):
            VideoTensor(np.full((1, 2, 2, 1), 1.5, dtype=np.float32))
        with pytest.raises(ParameterError):
            VideoTensor(np.full((1, 2, 2, 1), -0.1, dtype=np.float32))

    def test_rejects_nan_and_bad_channels(self):
        bad = np.zeros((1, 2, 2, 1), dtype=np.float32)
        bad[0, 0, 0, 0] = np.nan
        with pytest.raises(ParameterError):
            VideoTensor(bad)
        with pytest.raises(ParameterError):
            VideoTensor(np.zeros((1, 2, 2, 2), dtype=np.float32))

    def test_from_array_adds_channel(self):
        v = VideoTensor.from_array(np.zeros((2, 3, 4)))
        assert v.shape == (2, 3, 4, 1)

    def test_immutable(self):
        v = rand_video()
        with pytest.raises(ValueError):
            v.data[0, 0, 0, 0] = 0.0


class TestBlur:

    def test_kernel_normalized(self):
        k = gaussian_kernel_1d(2.0, 2.0)
        assert len(k) == 9  # radius ceil(2*2) = 4
        assert abs(k.sum() - 1.0) < 1e-12

    def test_constant_video_unchanged(self):
        v = VideoTensor(np.full((3, 5, 5, 1), 0.7, dtype=np.float32))
        out = gaussian_blur_3d(v, BlurParams(1.5, 1.0))
        np.testing.assert_allclose(out.data, 0.7, atol=1e-6)

    def test_impulse_mass_conserved_per_frame(self):
        # sigma_time = 0: each frame is filtered independently, and a
        # normalized kernel conserves total mass away from the edges.
        arr = np.zeros((1, 21, 21, 1), dtype=np.float32)
        arr[0, 10, 10, 0] = 1.0
        out = gaussian_blur_3d(VideoTensor(arr), BlurParams(1.0, 0.0, 2.0))
        assert abs(out.data.sum() - 1.0) < 1e-6

    def test_checkerboard_variance_drops(self):
        yy, xx = np.meshgrid(np.arange(8), np.arange(8), indexing="ij")
        frame = ((yy + xx) % 2).astype(np.float32)
        vol = np.stack([frame, frame])
        blurred = blur_volume(vol, BlurParams(2.0, 0.0, 2.0))
        oracle = dense_blur_3d(vol, 2.0, 0.0, 2.0)
        np.testing.assert_allclose(blurred, oracle, atol=1e-5)
        for f in range(2):
            assert blurred[f].var() < vol[f].var()

    def test_separable_matches_dense_oracle_random(self):
        rng = np.random.default_rng(7)
        vol = rng.random((4, 6, 5))
        out = blur_volume(vol, BlurParams(1.2, 0.8, 2.0))
        oracle = dense_blur_3d(vol, 1.2, 0.8, 2.0)
        np.testing.assert_allclose(out, oracle, atol=1e-5)

    def test_linearity_preclip(self):
        rng = np.random.default_rng(1)
        u = rng.random((3, 6, 6)).astype(np.float32)
        v = rng.random((3, 6, 6)).astype(np.float32)
        p = BlurParams(1.5, 0.5)
        lhs = blur_volume(2.0 * u - 0.5 * v, p)
        rhs = 2.0 * blur_volume(u, p) - 0.5 * blur_volume(v, p)
        np.testing.assert_allclose(lhs, rhs, atol=1e-5)

    def test_output_dims_and_range(self):
        v = rand_video(4, 7, 6, 3)
        out = gaussian_blur_3d(v, BlurParams(2.0, 1.0))
        assert out.shape == v.shape
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0

    def test_bad_params_rejected(self):
        with pytest.raises(ParameterError):
            BlurParams(0.0, 1.0)
        with pytest.raises(ParameterError):
            BlurParams(1.0, -1.0)
        with pytest.raises(ParameterError):
            BlurParams(float("nan"), 0.0)


class TestRvxRoundTrip:

    def test_bitwise_round_trip(self, tmp_path):
        v = rand_video(3, 4, 5, 3, seed=11)
        path = tmp_path / "v.rvx"
        write_tensor(v, path)
        back = read_tensor(path)
        assert back.shape == v.shape
        assert np.array_equal(back.data, v.data)
        assert back.data.tobytes() == v.data.tobytes()

    def test_round_trip_many_shapes(self, tmp_path):
        rng = np.random.default_rng(3)
        for i, shape in enumerate([(1, 1, 1, 1), (2, 3, 4, 1), (5, 2, 2, 3)]):
            v = VideoTensor(rng.random(shape, dtype=np.float32))
            path = tmp_path / f"v{i}.rvx"
            write_tensor(v, path)
            assert np.array_equal(read_tensor(path).data, v.data)

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.rvx"
        write_tensor(rand_video(), path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"NOPE"
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            read_tensor(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short.rvx"
        write_tensor(rand_video(), path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(FormatError):
            read_tensor(path)

    def test_header_payload_mismatch(self, tmp_path):
        path = tmp_path / "mismatch.rvx"
        v = rand_video(2, 3, 3, 1)
        write_tensor(v, path)
        raw = bytearray(path.read_bytes())
        # inflate t in the header without adding payload
        raw[4:8] = np.asarray([99], dtype="<u4").tobytes()
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            read_tensor(path)


class TestPngFrames:

    def test_round_trip_8bit_exact(self, tmp_path):
        # 8-bit grid values survive the PNG round trip exactly
        rng = np.random.default_rng(5)
        raw = rng.integers(0, 256, size=(2, 4, 4, 3)).astype(np.float32) / 255.0
        v = VideoTensor(raw)
        write_frames(v, tmp_path)
        back = read_frames(tmp_path)
        np.testing.assert_allclose(back.data, v.data, atol=1e-7)

    def test_gray_frames(self, tmp_path):
        v = rand_video(2, 3, 3, 1)
        write_frames(v, tmp_path)
        back = read_frames(tmp_path)
        assert back.c == 1
        np.testing.assert_allclose(back.data, v.data, atol=1 / 255.0)

    def test_missing_dir_is_format_error(self, tmp_path):
        with pytest.raises((FormatError, OSError)):
            read_frames(tmp_path / "nope")
