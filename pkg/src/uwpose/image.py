"""Float rasters and their 8-bit portable-anymap export.

An image is a float array of shape ``(height, width, channels)`` with
``channels`` 1 or 3 and values in ``[0, 1]``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from uwpose.errors import AlreadyGrayscale, ShapeMismatch

LUMA = np.array([0.299, 0.587, 0.114])


def check_image(img: np.ndarray) -> np.ndarray:
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ShapeMismatch(f"expected (H, W, 1|3) image, got shape {img.shape}")
    return img


def to_grayscale(img: np.ndarray) -> np.ndarray:
    check_image(img)
    if img.shape[2] == 1:
        raise AlreadyGrayscale("image already has a single channel")
    return (img @ LUMA)[..., None].astype(img.dtype)


def quantize(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_pnm(path, img: np.ndarray) -> None:
    """Write P5 (gray) or P6 (RGB) binary pixmap with 8-bit quantization."""
    check_image(img)
    h, w, c = img.shape
    magic = b"P5" if c == 1 else b"P6"
    header = magic + f"\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + quantize(img).tobytes())


def read_pnm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    # header is four whitespace-separated tokens; no comment support needed for our own files
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while raw[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while not raw[pos : pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    pos += 1
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic not in (b"P5", b"P6") or maxval != 255:
        raise ShapeMismatch(f"unsupported pixmap {magic!r} maxval {maxval}")
    c = 1 if magic == b"P5" else 3
    data = np.frombuffer(raw, dtype=np.uint8, count=w * h * c, offset=pos)
    return data.reshape(h, w, c).astype(np.float32) / 255.0
