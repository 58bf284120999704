from __future__ import annotations

import numpy as np


def round_half_away(x) -> np.ndarray:
    """Round to nearest integer, ties away from zero (numpy's ``round`` goes to even)."""
    x = np.asarray(x, dtype=np.float64)
    return np.copysign(np.floor(np.abs(x) + 0.5), x)


def to_bytes(x) -> np.ndarray:
    return np.clip(round_half_away(x), 0, 255).astype(np.uint8)
