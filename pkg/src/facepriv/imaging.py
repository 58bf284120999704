"""Classical face obfuscators and full-reference image quality metrics.

Images are ``uint8`` numpy arrays shaped ``(rows, cols)`` or
``(rows, cols, channels)`` with 1 or 3 channels. Binary PGM (P5) and PPM (P6)
with maxval 255 are the supported file formats.
"""

from __future__ import annotations

import math
import re
from typing import BinaryIO, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from ._numeric import to_bytes
from .errors import DimensionError, FormatError, ImageError, LevelError

# conventional five-scale weights for MS-SSIM
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


def as_image(image) -> np.ndarray:
    """Validate and return ``image`` as a 3-D ``uint8`` array (channels last)."""
    a = np.asarray(image)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3 or a.shape[2] not in (1, 3):
        raise ImageError(f"expected (rows, cols[, 1|3]) image, got shape {a.shape}")
    if a.shape[0] == 0 or a.shape[1] == 0:
        raise ImageError("image is empty")
    if a.dtype != np.uint8:
        if not np.issubdtype(a.dtype, np.integer) and not np.all(np.mod(a, 1) == 0):
            raise ImageError("pixel values must be integers")
        if a.min() < 0 or a.max() > 255:
            raise ImageError("pixel values must lie in [0, 255]")
        a = a.astype(np.uint8)
    return a


def _restore_shape(out: np.ndarray, like) -> np.ndarray:
    return out[:, :, 0] if np.asarray(like).ndim == 2 else out


# --- obfuscators -----------------------------------------------------------

def gaussian_kernel(sigma: float, size: int) -> np.ndarray:
    """Normalized ``size x size`` Gaussian kernel (``size`` odd)."""
    if size <= 0 or size % 2 == 0:
        raise ImageError(f"kernel size must be a positive odd integer, got {size}")
    if not sigma > 0:
        raise ImageError(f"sigma must be > 0, got {sigma}")
    ax = np.arange(size) - size // 2
    g = np.exp(-(ax ** 2) / (2.0 * sigma ** 2))
    k = np.outer(g, g)
    return k / k.sum()


def blur(image, sigma: float, kernel_size: int) -> np.ndarray:
    """Gaussian blur per channel with clamp-to-edge borders."""
    img = as_image(image)
    k = gaussian_kernel(sigma, kernel_size)
    out = np.empty_like(img)
    for c in range(img.shape[2]):
        conv = ndimage.correlate(img[:, :, c].astype(np.float64), k, mode="nearest")
        out[:, :, c] = to_bytes(conv)
    return _restore_shape(out, image)


def pixelate(image, block: int) -> np.ndarray:
    """Replace each ``block x block`` tile (edge tiles may be smaller) by its rounded mean."""
    if block <= 0:
        raise ImageError(f"block size must be positive, got {block}")
    img = as_image(image)
    out = np.empty_like(img)
    rows, cols = img.shape[:2]
    for r in range(0, rows, block):
        for c in range(0, cols, block):
            tile = img[r:r + block, c:c + block].astype(np.float64)
            out[r:r + block, c:c + block] = to_bytes(tile.mean(axis=(0, 1)))
    return _restore_shape(out, image)


def mask(image, rect: Tuple[int, int, int, int], color: Union[int, Sequence[int]] = 0) -> np.ndarray:
    """Fill ``rect = (x, y, width, height)`` (x = column, y = row) with ``color``."""
    img = as_image(image)
    x, y, w, h = (int(v) for v in rect)
    rows, cols = img.shape[:2]
    if w <= 0 or h <= 0:
        raise ImageError("mask width and height must be positive")
    if x < 0 or y < 0 or x + w > cols or y + h > rows:
        raise ImageError(f"mask rectangle {rect} exceeds the {cols}x{rows} image")
    color = np.atleast_1d(np.asarray(color))
    if color.size not in (1, img.shape[2]):
        raise ImageError(f"color needs 1 or {img.shape[2]} components")
    if color.min() < 0 or color.max() > 255:
        raise ImageError("color components must lie in [0, 255]")
    out = img.copy()
    out[y:y + h, x:x + w] = color.astype(np.uint8)
    return _restore_shape(out, image)


# --- quality metrics -------------------------------------------------------

def _pair(reference, test) -> Tuple[np.ndarray, np.ndarray]:
    a, b = as_image(reference), as_image(test)
    if a.shape != b.shape:
        raise DimensionError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a.astype(np.float64), b.astype(np.float64)


def psnr(reference, test) -> float:
    """Peak signal-to-noise ratio in dB; ``math.inf`` for identical images."""
    a, b = _pair(reference, test)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def _window_means(x: np.ndarray, window: int) -> np.ndarray:
    # mean over every window x window patch that fits inside the image
    c = np.cumsum(np.cumsum(np.pad(x, ((1, 0), (1, 0))), axis=0), axis=1)
    s = c[window:, window:] - c[:-window, window:] - c[window:, :-window] + c[:-window, :-window]
    return s / float(window * window)


def _ssim_terms(a: np.ndarray, b: np.ndarray, window: int, k1: float, k2: float
                ) -> Tuple[np.ndarray, np.ndarray]:
    """Per-window luminance and contrast-structure maps for one channel (float input)."""
    c1 = (k1 * 255.0) ** 2
    c2 = (k2 * 255.0) ** 2
    mu_a = _window_means(a, window)
    mu_b = _window_means(b, window)
    # population statistics inside each window; rounding can push them past
    # their bounds, so clamp variances at 0 and covariance by Cauchy-Schwarz
    var_a = np.maximum(_window_means(a * a, window) - mu_a ** 2, 0.0)
    var_b = np.maximum(_window_means(b * b, window) - mu_b ** 2, 0.0)
    bound = np.sqrt(var_a * var_b)
    cov = np.clip(_window_means(a * b, window) - mu_a * mu_b, -bound, bound)
    lum = (2 * mu_a * mu_b + c1) / (mu_a ** 2 + mu_b ** 2 + c1)
    cs = (2 * cov + c2) / (var_a + var_b + c2)
    return lum, cs


def _check_window(shape, window: int) -> None:
    if window <= 0:
        raise ImageError("window must be positive")
    if window > shape[0] or window > shape[1]:
        raise ImageError(f"window {window} does not fit a {shape[1]}x{shape[0]} image")


def ssim(reference, test, window: int = 8, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean structural similarity over all ``window x window`` positions, channels averaged.

    Uniform window, population (co)variances, ``C1 = (k1 * 255)^2`` and
    ``C2 = (k2 * 255)^2``.
    """
    a, b = _pair(reference, test)
    _check_window(a.shape, window)
    vals = []
    for c in range(a.shape[2]):
        lum, cs = _ssim_terms(a[:, :, c], b[:, :, c], window, k1, k2)
        vals.append(float(np.mean(lum * cs)))
    return float(np.mean(vals))


def downsample(x: np.ndarray) -> np.ndarray:
    """2x2 mean then decimate; an odd trailing row or column is dropped."""
    r, c = (x.shape[0] // 2) * 2, (x.shape[1] // 2) * 2
    x = x[:r, :c]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def ms_ssim(reference, test, levels: int = 5, weights: Optional[Sequence[float]] = None,
            window: int = 8, k1: float = 0.01, k2: float = 0.03) -> float:
    """Multi-scale SSIM.

    Scale ``j < levels`` contributes ``mean(cs_j) ** w_j``; the coarsest scale
    contributes the full SSIM mean ``mean(l * cs) ** w_last``, so a single
    level reduces to :func:`ssim`. Negative means are clamped to 0. Without
    explicit weights the first ``levels`` conventional weights are used,
    renormalized to sum to 1.
    """
    if levels < 1:
        raise LevelError("levels must be >= 1")
    if weights is None:
        if levels > len(MS_SSIM_WEIGHTS):
            raise LevelError(f"give explicit weights for more than {len(MS_SSIM_WEIGHTS)} levels")
        w = np.asarray(MS_SSIM_WEIGHTS[:levels], dtype=np.float64)
        w = w / w.sum()
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (levels,):
            raise LevelError(f"need {levels} weights, got {w.size}")
    a, b = _pair(reference, test)
    need = window * 2 ** (levels - 1)
    if min(a.shape[:2]) < need:
        raise LevelError(f"{levels} levels with window {window} need images of at least {need}x{need}")
    per_channel = []
    for c in range(a.shape[2]):
        x, y = a[:, :, c], b[:, :, c]
        value = 1.0
        for j in range(levels):
            lum, cs = _ssim_terms(x, y, window, k1, k2)
            if j == levels - 1:
                term = float(np.mean(lum * cs))
            else:
                term = float(np.mean(cs))
                x, y = downsample(x), downsample(y)
            value *= max(term, 0.0) ** w[j]
        per_channel.append(value)
    return float(np.mean(per_channel))


# --- PGM / PPM -------------------------------------------------------------

_HEADER_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def read_pnm(fp: BinaryIO) -> np.ndarray:
    """Read a binary PGM (P5) or PPM (P6) with maxval 255."""
    data = fp.read()
    pos = 0
    tokens = []
    for _ in range(4):
        m = _HEADER_TOKEN.match(data, pos)
        if not m:
            raise FormatError("truncated PNM header")
        tokens.append(m.group(1))
        pos = m.end()
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"unsupported PNM magic {magic!r} (need P5 or P6)")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError("non-integer PNM header field") from None
    if maxval != 255:
        raise FormatError(f"only maxval 255 is supported, got {maxval}")
    if width <= 0 or height <= 0:
        raise FormatError("PNM dimensions must be positive")
    if pos >= len(data) or data[pos:pos + 1] not in (b" ", b"\t", b"\n", b"\r"):
        raise FormatError("missing whitespace after PNM header")
    pos += 1
    channels = 1 if magic == b"P5" else 3
    size = width * height * channels
    raw = data[pos:pos + size]
    if len(raw) != size:
        raise FormatError(f"PNM pixel data truncated: need {size} bytes, got {len(raw)}")
    img = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, channels).copy()
    return img[:, :, 0] if channels == 1 else img


def write_pnm(fp: BinaryIO, image) -> None:
    img = as_image(image)
    rows, cols, channels = img.shape
    magic = b"P5" if channels == 1 else b"P6"
    fp.write(magic + b"\n%d %d\n255\n" % (cols, rows))
    fp.write(np.ascontiguousarray(img).tobytes())
