"""Shared test helpers: bit-exact image builders."""

from __future__ import annotations

import io

import numpy as np
import pytest

from envseal.core import Bitmap


def pgm_bytes(pixels: np.ndarray) -> bytes:
    """Binary PGM (P5) for a uint8 2-D array."""
    arr = np.asarray(pixels, dtype=np.uint8)
    return f"P5\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode() + arr.tobytes()


def png_bytes(pixels: np.ndarray) -> bytes:
    """Lossless PNG for a uint8 2-D (gray) or 3-D (RGB) array."""
    from PIL import Image

    arr = np.asarray(pixels, dtype=np.uint8)
    img = Image.fromarray(arr, mode="L" if arr.ndim == 2 else "RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def gray_bitmap(pixels: np.ndarray) -> Bitmap:
    arr = np.asarray(pixels, dtype=np.uint8)
    return Bitmap(arr.shape[1], arr.shape[0], 1, arr.tobytes())


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)
