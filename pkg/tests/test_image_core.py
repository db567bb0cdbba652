import numpy as np
import pytest

from wfpsnr import (
    BlockGrid,
    GrayImage,
    MalformedHeaderError,
    TruncatedPayloadError,
    UnsupportedFormatError,
    block_reduce,
    load_pgm,
    save_pgm,
    upsample_nearest,
)
from wfpsnr.image_core import block_mean, resize_bilinear


def write_pgm_bytes(path, raw: bytes):
    path.write_bytes(raw)
    return path


class TestGrayImage:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            GrayImage(np.array([[0.0, 1.5]]))
        with pytest.raises(ValueError):
            GrayImage(np.array([[-0.1, 0.5]]))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            GrayImage(np.array([[np.nan, 0.5]]))

    def test_is_immutable(self):
        img = GrayImage(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            img.pixels[0, 0] = 1.0


class TestPgmLoad:
    def test_zero_payload(self, tmp_path):
        p = write_pgm_bytes(tmp_path / "z.pgm", b"P5\n4 4\n255\n" + bytes(16))
        img = load_pgm(p)
        assert (img.width, img.height) == (4, 4)
        assert np.all(img.pixels == 0.0)

    def test_range_endpoints(self, tmp_path):
        p = write_pgm_bytes(tmp_path / "e.pgm", b"P5\n2 1\n255\n" + bytes([255, 0]))
        img = load_pgm(p)
        assert img.pixels[0, 0] == 1.0
        assert img.pixels[0, 1] == 0.0

    def test_sixteen_bit_big_endian(self, tmp_path):
        payload = (65535).to_bytes(2, "big") + (0).to_bytes(2, "big")
        p = write_pgm_bytes(tmp_path / "d.pgm", b"P5\n2 1\n65535\n" + payload)
        img = load_pgm(p)
        assert img.pixels[0, 0] == 1.0
        assert img.pixels[0, 1] == 0.0

    def test_comments_and_whitespace_tolerated(self, tmp_path):
        raw = b"P5 # magic\n# a comment\n 2\t1 \n255\n" + bytes([7, 9])
        img = load_pgm(write_pgm_bytes(tmp_path / "c.pgm", raw))
        assert np.allclose(img.pixels, np.array([[7, 9]]) / 255.0)

    def test_unsupported_magic(self, tmp_path):
        p = write_pgm_bytes(tmp_path / "bad.pgm", b"P2\n2 1\n255\n7 9")
        with pytest.raises(UnsupportedFormatError):
            load_pgm(p)

    def test_unsupported_maxval(self, tmp_path):
        p = write_pgm_bytes(tmp_path / "m.pgm", b"P5\n2 1\n100\n" + bytes(2))
        with pytest.raises(UnsupportedFormatError):
            load_pgm(p)

    def test_malformed_header(self, tmp_path):
        p = write_pgm_bytes(tmp_path / "h.pgm", b"P5\n2 x\n255\n" + bytes(2))
        with pytest.raises(MalformedHeaderError):
            load_pgm(p)
        p = write_pgm_bytes(tmp_path / "h2.pgm", b"P5\n2\n")
        with pytest.raises(MalformedHeaderError):
            load_pgm(p)

    def test_truncated_payload(self, tmp_path):
        p = write_pgm_bytes(tmp_path / "t.pgm", b"P5\n4 4\n255\n" + bytes(10))
        with pytest.raises(TruncatedPayloadError):
            load_pgm(p)

    def test_error_types_are_distinct(self):
        assert not issubclass(MalformedHeaderError, UnsupportedFormatError)
        assert not issubclass(TruncatedPayloadError, MalformedHeaderError)

    def test_missing_file_raises_oserror(self, tmp_path):
        with pytest.raises(OSError):
            load_pgm(tmp_path / "nope.pgm")


class TestPgmSave:
    def test_all_zero_payload(self, tmp_path):
        out = tmp_path / "v.pgm"
        save_pgm(GrayImage(np.zeros((3, 5))), out)
        assert out.read_bytes() == b"P5\n5 3\n255\n" + bytes(15)

    def test_all_one_payload(self, tmp_path):
        out = tmp_path / "w.pgm"
        save_pgm(GrayImage(np.ones((2, 2))), out)
        assert out.read_bytes().endswith(bytes([255] * 4))

    def test_rounds_half_up(self, tmp_path):
        # independent quantizer: int(s * 255 + 0.5)
        out = tmp_path / "r.pgm"
        save_pgm(GrayImage(np.array([[0.5]])), out)
        assert out.read_bytes()[-1] == int(0.5 * 255 + 0.5) == 128

    def test_round_trip_byte_identity_over_corpus(self, tmp_path):
        rng = np.random.default_rng(42)
        for i in range(20):
            h, w = rng.integers(1, 40, size=2)
            img = GrayImage(rng.random((h, w)))
            first = tmp_path / f"a{i}.pgm"
            second = tmp_path / f"b{i}.pgm"
            save_pgm(img, first)
            save_pgm(load_pgm(first), second)
            assert first.read_bytes() == second.read_bytes()

    def test_every_byte_value_survives(self, tmp_path):
        raw = b"P5\n256 1\n255\n" + bytes(range(256))
        src = write_pgm_bytes(tmp_path / "all.pgm", raw)
        out = tmp_path / "out.pgm"
        save_pgm(load_pgm(src), out)
        assert out.read_bytes() == raw


class TestBlockReduce:
    def test_constant_block(self):
        grid = block_reduce(GrayImage(np.full((8, 8), 0.3)), 8)
        assert grid.values.shape == (1, 1)
        assert grid.values[0, 0] == pytest.approx(0.3, abs=1e-15)

    def test_separable_halves(self):
        img = np.zeros((8, 16))
        img[:, 8:] = 1.0
        grid = block_reduce(GrayImage(img), 8)
        assert grid.values.tolist() == [[0.0, 1.0]]

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(7)
        img = rng.random((24, 24))
        grid = block_reduce(GrayImage(img), 8)
        for r in range(3):
            for c in range(3):
                expected = 0.0
                for i in range(8):
                    for j in range(8):
                        expected += img[r * 8 + i, c * 8 + j]
                assert abs(grid.values[r, c] - expected / 64.0) < 1e-12

    def test_remainder_blocks_cover_all_pixels(self):
        rng = np.random.default_rng(8)
        img = rng.random((20, 13))
        grid = block_reduce(GrayImage(img), 8)
        assert (grid.rows, grid.cols) == (3, 2)
        # bottom-right block holds the 4x5 remainder
        tile = img[16:20, 8:13]
        assert abs(grid.values[2, 1] - tile.mean()) < 1e-12

    def test_invariant_to_within_block_permutation(self):
        rng = np.random.default_rng(9)
        img = rng.random((16, 16))
        shuffled = img.copy()
        for r in range(2):
            for c in range(2):
                tile = shuffled[r * 8 : (r + 1) * 8, c * 8 : (c + 1) * 8]
                flat = tile.ravel()
                rng.shuffle(flat)
                shuffled[r * 8 : (r + 1) * 8, c * 8 : (c + 1) * 8] = flat.reshape(8, 8)
        a = block_reduce(GrayImage(img), 8).values
        b = block_reduce(GrayImage(shuffled), 8).values
        assert np.allclose(a, b, atol=1e-12)

    def test_zero_block_size_rejected(self):
        with pytest.raises(ValueError):
            block_mean(np.zeros((8, 8)), 0)

    def test_unknown_reducer_rejected(self):
        with pytest.raises(ValueError):
            block_reduce(GrayImage(np.zeros((8, 8))), 8, reducer="median")


class TestUpsampleNearest:
    def test_single_block(self):
        field = upsample_nearest(BlockGrid(8, np.array([[0.4]])), 8, 8)
        assert np.all(field == 0.4)

    def test_two_blocks_split_columns(self):
        field = upsample_nearest(BlockGrid(8, np.array([[0.1, 0.9]])), 16, 8)
        assert np.all(field[:, :8] == 0.1)
        assert np.all(field[:, 8:] == 0.9)

    def test_border_clamps_to_last_block(self):
        grid = BlockGrid(8, np.arange(9, dtype=float).reshape(3, 3))
        field = upsample_nearest(grid, 20, 20)
        # index arithmetic oracle: pixel -> min(p // 8, 2)
        for r in (0, 7, 8, 15, 16, 19):
            for c in (0, 7, 8, 15, 16, 19):
                assert field[r, c] == grid.values[min(r // 8, 2), min(c // 8, 2)]

    def test_round_trip_with_block_reduce(self):
        rng = np.random.default_rng(11)
        grid = BlockGrid(8, rng.random((4, 5)))
        field = upsample_nearest(grid, 40, 32)
        back = block_mean(field, 8)
        assert np.allclose(back, grid.values, atol=1e-15)

    def test_mismatched_geometry_rejected(self):
        with pytest.raises(ValueError):
            upsample_nearest(BlockGrid(8, np.ones((2, 2))), 64, 64)

    def test_empty_grid_rejected(self):
        with pytest.raises(ValueError):
            BlockGrid(8, np.empty((0, 0)))


class TestResizeBilinear:
    def test_identity_when_same_size(self):
        rng = np.random.default_rng(12)
        f = rng.random((16, 16))
        assert np.allclose(resize_bilinear(f, 16, 16), f, atol=1e-12)

    def test_constant_preserved(self):
        f = np.full((10, 10), 0.37)
        out = resize_bilinear(f, 64, 64)
        assert np.allclose(out, 0.37, atol=1e-12)
