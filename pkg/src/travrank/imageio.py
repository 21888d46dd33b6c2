"""PNG image IO: 8-bit RGB camera images, 16-bit grayscale ground-truth fields."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

GRAY16_MAX = 65535


def save_rgb8(image: np.ndarray, path: str | Path) -> None:
    """Save an HxWx3 float array in [0, 1] as an 8-bit RGB PNG."""
    arr = np.clip(np.asarray(image), 0.0, 1.0)
    Image.fromarray(np.round(arr * 255.0).astype(np.uint8), mode="RGB").save(path)


def load_rgb8(path: str | Path) -> np.ndarray:
    """Load an image as HxWx3 float32 in [0, 1], converting to RGB if needed."""
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        return np.asarray(rgb, dtype=np.float32) / 255.0


def save_gray16(field: np.ndarray, path: str | Path) -> None:
    """Save an HxW float array in [0, 1] as a 16-bit grayscale PNG."""
    arr = np.clip(np.asarray(field), 0.0, 1.0)
    raw = np.round(arr * GRAY16_MAX).astype(np.uint16)
    Image.fromarray(raw).save(path)


def load_gray16(path: str | Path) -> np.ndarray:
    """Load a 16-bit grayscale PNG as HxW float32 in [0, 1]."""
    with Image.open(path) as img:
        raw = np.asarray(img)
    return raw.astype(np.float32) / GRAY16_MAX


def load_gray(path: str | Path) -> np.ndarray:
    """Load a grayscale PNG as raw integer values (class-id maps)."""
    with Image.open(path) as img:
        return np.asarray(img).astype(np.int64)


def save_gray8(values: np.ndarray, path: str | Path) -> None:
    """Save an HxW integer array (values < 256) as an 8-bit grayscale PNG."""
    Image.fromarray(np.asarray(values).astype(np.uint8), mode="L").save(path)


def scale_point(
    x: float, y: float, from_w: int, from_h: int, to_w: int, to_h: int
) -> tuple[float, float]:
    """Map a pixel coordinate between resolutions (pixel-center convention)."""
    if from_w == to_w and from_h == to_h:
        return float(x), float(y)
    nx = (x + 0.5) * (to_w / from_w) - 0.5
    ny = (y + 0.5) * (to_h / from_h) - 0.5
    return nx, ny


def bilinear_at(field: np.ndarray, x: float, y: float) -> float:
    """Bilinear sample of an HxW array at a float coordinate (clamped)."""
    h, w = field.shape
    x = min(max(x, 0.0), w - 1.0)
    y = min(max(y, 0.0), h - 1.0)
    x0 = int(np.floor(x))
    y0 = int(np.floor(y))
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    wx = x - x0
    wy = y - y0
    top = field[y0, x0] * (1 - wx) + field[y0, x1] * wx
    bot = field[y1, x0] * (1 - wx) + field[y1, x1] * wx
    return float(top * (1 - wy) + bot * wy)


def resize_rgb(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize of an HxWx3 float image in [0, 1]."""
    if image.shape[0] == height and image.shape[1] == width:
        return image.astype(np.float32)
    raw = Image.fromarray(np.round(np.clip(image, 0, 1) * 255.0).astype(np.uint8), mode="RGB")
    out = raw.resize((width, height), Image.BILINEAR)
    return np.asarray(out, dtype=np.float32) / 255.0
