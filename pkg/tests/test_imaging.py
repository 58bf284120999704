import io
import math

import numpy as np
import pytest

from oracles import direct_blur, round_away
from facepriv.errors import DimensionError, FormatError, ImageError, LevelError
from facepriv.imaging import (
    blur,
    gaussian_kernel,
    mask,
    ms_ssim,
    pixelate,
    psnr,
    read_pnm,
    ssim,
    write_pnm,
)


@pytest.fixture(scope="module")
def texture():
    gen = np.random.default_rng(42)
    base = gen.integers(0, 256, size=(32, 32, 3))
    # upsample a coarse random field so there is structure at several scales
    img = np.kron(base, np.ones((4, 4, 1)))
    return np.clip(img + gen.integers(-20, 21, size=img.shape), 0, 255).astype(np.uint8)


class TestObfuscators:
    def test_blur_constant(self):
        img = np.full((9, 7, 3), 77, dtype=np.uint8)
        assert np.array_equal(blur(img, 2.0, 5), img)

    def test_blur_impulse(self):
        img = np.zeros((5, 5), dtype=np.uint8)
        img[2, 2] = 255
        out = blur(img, 1.0, 3)
        expected = [[round_away(v) for v in row] for row in direct_blur(img, 1.0, 3)]
        assert out.tolist() == expected
        assert out[1:4, 1:4].tolist() == [[19, 32, 19], [32, 52, 32], [19, 32, 19]]

    def test_blur_matches_direct_convolution(self, texture):
        gray = texture[:20, :20, 0]
        expected = np.vectorize(round_away)(direct_blur(gray, 1.5, 5))
        assert np.array_equal(blur(gray, 1.5, 5), np.clip(expected, 0, 255))

    def test_kernel_validation(self):
        with pytest.raises(ImageError):
            gaussian_kernel(1.0, 4)
        with pytest.raises(ImageError):
            gaussian_kernel(1.0, 0)
        assert gaussian_kernel(1.0, 5).sum() == pytest.approx(1.0, abs=1e-15)

    def test_pixelate_blockwise_constant(self):
        img = np.kron(np.arange(6).reshape(2, 3), np.ones((4, 4))).astype(np.uint8)
        assert np.array_equal(pixelate(img, 4), img)

    def test_pixelate_idempotent(self, texture):
        once = pixelate(texture, 6)
        assert np.array_equal(pixelate(once, 6), once)

    def test_pixelate_rounds_half_up(self):
        img = np.array([[0, 1]], dtype=np.uint8)
        assert pixelate(img, 2).tolist() == [[1, 1]]

    def test_mask(self):
        img = np.zeros((4, 5, 3), dtype=np.uint8)
        out = mask(img, (1, 2, 3, 2), (255, 0, 10))
        assert out[2:4, 1:4].reshape(-1, 3).tolist() == [[255, 0, 10]] * 6
        assert out.sum() == 6 * 265

    def test_mask_out_of_bounds(self):
        with pytest.raises(ImageError):
            mask(np.zeros((4, 4), dtype=np.uint8), (2, 2, 3, 1))

    def test_range(self, texture):
        for out in (blur(texture, 3, 7), pixelate(texture, 5), mask(texture, (0, 0, 3, 3), 255)):
            assert out.dtype == np.uint8

    def test_rejects_out_of_range_pixels(self):
        with pytest.raises(ImageError):
            blur(np.array([[300]]), 1.0, 3)


class TestPsnr:
    def test_identical(self, texture):
        assert psnr(texture, texture) == math.inf

    def test_extremes(self):
        assert psnr(np.zeros((3, 3)), np.full((3, 3), 255)) == pytest.approx(0.0, abs=1e-12)

    def test_single_pixel(self):
        # 10 log10(65025 / 256) evaluated with mpmath at 30 digits
        assert psnr([[100]], [[116]]) == pytest.approx(24.048403955560608, abs=1e-9)

    def test_symmetric(self, texture):
        other = blur(texture, 1.0, 3)
        assert psnr(texture, other) == psnr(other, texture)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            psnr(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_decreases_with_noise(self, texture):
        gen = np.random.default_rng(0)
        values = []
        for sigma in (1, 5, 20):
            noisy = np.clip(np.round(texture + gen.normal(0, sigma, texture.shape)), 0, 255)
            values.append(psnr(texture, noisy))
        assert values[0] > values[1] > values[2]


class TestSsim:
    def test_identical(self, texture):
        assert ssim(texture, texture) == pytest.approx(1.0, abs=1e-12)

    def test_constant_extremes(self):
        c1 = (0.01 * 255) ** 2
        value = ssim(np.zeros((16, 16)), np.full((16, 16), 255))
        assert value == pytest.approx(c1 / (65025 + c1), abs=1e-12)
        assert value == pytest.approx(9.9988e-5, abs=1e-6)

    def test_one_pixel_change(self, texture):
        other = texture.copy()
        other[5, 5, 0] ^= 1
        assert ssim(texture, other) < 1.0

    def test_symmetric(self, texture):
        other = pixelate(texture, 4)
        assert ssim(texture, other) == pytest.approx(ssim(other, texture), abs=1e-15)

    def test_window_too_large(self):
        with pytest.raises(ImageError):
            ssim(np.zeros((4, 4)), np.zeros((4, 4)))

    def test_matches_direct_window_loop(self, texture):
        a = texture[:12, :12, 0].astype(float)
        b = blur(texture, 1.0, 3)[:12, :12, 0].astype(float)
        c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
        vals = []
        for r in range(12 - 8 + 1):
            for c in range(12 - 8 + 1):
                x, y = a[r:r + 8, c:c + 8], b[r:r + 8, c:c + 8]
                mx, my = x.mean(), y.mean()
                vx, vy = x.var(), y.var()
                cov = ((x - mx) * (y - my)).mean()
                vals.append((2 * mx * my + c1) * (2 * cov + c2) / ((mx ** 2 + my ** 2 + c1) * (vx + vy + c2)))
        assert ssim(a.astype(np.uint8), b.astype(np.uint8)) == pytest.approx(np.mean(vals), abs=1e-10)


class TestMsSsim:
    def test_identical(self, texture):
        assert ms_ssim(texture, texture) == pytest.approx(1.0, abs=1e-12)

    def test_one_level_is_ssim(self, texture):
        other = blur(texture, 2.0, 5)
        assert ms_ssim(texture, other, levels=1) == pytest.approx(ssim(texture, other), abs=1e-9)

    def test_more_blur_lower_score(self, texture):
        mild = ms_ssim(texture, blur(texture, 1.0, 5))
        strong = ms_ssim(texture, blur(texture, 3.0, 9))
        assert strong < mild < 1.0

    def test_too_small(self):
        with pytest.raises(LevelError):
            ms_ssim(np.zeros((64, 64)), np.zeros((64, 64)), levels=5)

    def test_weight_count(self, texture):
        with pytest.raises(LevelError):
            ms_ssim(texture, texture, levels=2, weights=[1.0])


class TestPnm:
    @pytest.mark.parametrize("shape", [(5, 7), (6, 4, 3)])
    def test_round_trip(self, shape):
        img = np.random.default_rng(0).integers(0, 256, shape).astype(np.uint8)
        buf = io.BytesIO()
        write_pnm(buf, img)
        data = buf.getvalue()
        again = read_pnm(io.BytesIO(data))
        assert np.array_equal(again, img)
        buf2 = io.BytesIO()
        write_pnm(buf2, again)
        assert buf2.getvalue() == data

    def test_header_comments(self):
        data = b"P5\n# made by hand\n2 1\n255\n" + bytes([7, 9])
        assert read_pnm(io.BytesIO(data)).tolist() == [[7, 9]]

    @pytest.mark.parametrize("data", [b"P3\n1 1\n255\n0 0 0", b"P5\n1 1\n65535\n\x00\x00", b"P5\n2 2\n255\n\x00"])
    def test_rejects(self, data):
        with pytest.raises(FormatError):
            read_pnm(io.BytesIO(data))
