"""PNG reading/writing and resizing helpers shared across the pipeline."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "load_rgb",
    "save_rgb",
    "save_gray16",
    "load_gray16",
    "save_mask",
    "load_mask",
    "resize_rgb",
    "resize_mask",
]

WORKING_SIZE = 240  # every pipeline raster is 240 x 240


def load_rgb(path: str | Path) -> np.ndarray:
    """Decode any PIL-readable image to an (H, W, 3) uint8 array."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def save_rgb(pixels: np.ndarray, path: str | Path) -> None:
    Image.fromarray(np.asarray(pixels, dtype=np.uint8), mode="RGB").save(path)


def resize_rgb(pixels: np.ndarray, size: int = WORKING_SIZE) -> np.ndarray:
    """Bilinear resize to size x size."""
    img = Image.fromarray(np.asarray(pixels, dtype=np.uint8), mode="RGB")
    return np.asarray(img.resize((size, size), Image.BILINEAR))


def resize_mask(mask: np.ndarray, size: int = WORKING_SIZE) -> np.ndarray:
    """Nearest-neighbour resize for label/mask rasters (no value mixing)."""
    img = Image.fromarray(np.asarray(mask, dtype=np.uint8), mode="L")
    return np.asarray(img.resize((size, size), Image.NEAREST))


def save_gray16(values: np.ndarray, path: str | Path) -> None:
    arr = np.asarray(values)
    if arr.min() < 0 or arr.max() > 0xFFFF:
        raise ValueError("16-bit grayscale PNG requires values in [0, 65535]")
    Image.fromarray(arr.astype(np.uint16), mode="I;16").save(path)


def load_gray16(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img, dtype=np.uint16).astype(np.int32)


def save_mask(mask: np.ndarray, path: str | Path) -> None:
    """Binary raster to black/white 8-bit PNG."""
    Image.fromarray(np.where(np.asarray(mask, bool), 255, 0).astype(np.uint8), mode="L").save(path)


def load_mask(path: str | Path, threshold: int = 128) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("L")) >= threshold
