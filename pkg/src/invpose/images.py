"""Photo, mask and attribute-image files.

Photos are grayscale PGM (P5) or PNG, 8 or 16 bit, mapped to [0, 1] by
dividing by the maximum code value (255 or 65535).

``.aimg`` layout (little endian): magic ``AIMG1``, u32 width, u32 height,
u32 channels, ``height*width*channels`` f32 values in row-major
(row, column, channel) order, then the row-major mask packed 8 pixels per
byte, most significant bit first (``numpy.packbits``).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError
from .raster import AttributeImage

AIMG_MAGIC = b"AIMG1"


def read_gray(path: str | Path) -> np.ndarray:
    """Read a grayscale image as float64 in [0, 1]."""
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("I;16", "I;16B", "I;16L", "I"):
                data = np.asarray(im, dtype=np.float64) / 65535.0
            elif mode == "L":
                data = np.asarray(im, dtype=np.float64) / 255.0
            elif mode in ("RGB", "RGBA", "LA", "P", "1"):
                data = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
            else:
                raise ConfigError(f"{path}: unsupported image mode {mode}")
    except (Image.UnidentifiedImageError, SyntaxError) as exc:
        raise ConfigError(f"{path}: not a readable image ({exc})") from None
    return np.clip(data, 0.0, 1.0)


def write_gray(path: str | Path, gray: np.ndarray, bits: int = 16) -> None:
    """Write a [0, 1] grayscale array; format follows the suffix (.pgm or .png)."""
    gray = np.clip(np.asarray(gray, dtype=np.float64), 0.0, 1.0)
    if bits == 8:
        im = Image.fromarray(np.rint(gray * 255.0).astype(np.uint8), mode="L")
    elif bits == 16:
        im = Image.fromarray(np.rint(gray * 65535.0).astype(np.uint16))
    else:
        raise ConfigError("bits must be 8 or 16")
    suffix = Path(path).suffix.lower()
    if suffix not in (".pgm", ".png"):
        raise ConfigError(f"{path}: output must be .pgm or .png")
    im.save(path, format="PPM" if suffix == ".pgm" else "PNG")


def read_photo(path: str | Path, mask_path: str | Path | None = None) -> AttributeImage:
    gray = read_gray(path)
    mask = read_mask(mask_path) if mask_path is not None else None
    if mask is not None and mask.shape != gray.shape:
        raise ConfigError(f"mask {mask.shape} and photo {gray.shape} differ in size")
    return AttributeImage.from_gray(gray, mask)


def read_mask(path: str | Path) -> np.ndarray:
    return read_gray(path) > 0.5


def write_mask(path: str | Path, mask: np.ndarray) -> None:
    write_gray(path, np.asarray(mask, dtype=np.float64), bits=8)


def write_aimg(path: str | Path, img: AttributeImage) -> None:
    h, w, c = img.channels.shape
    with open(path, "wb") as fh:
        fh.write(AIMG_MAGIC)
        fh.write(struct.pack("<III", w, h, c))
        fh.write(np.ascontiguousarray(img.channels, dtype="<f4").tobytes())
        fh.write(np.packbits(img.mask.reshape(-1)).tobytes())


def read_aimg(path: str | Path) -> AttributeImage:
    data = Path(path).read_bytes()
    if data[:5] != AIMG_MAGIC:
        raise ConfigError(f"{path}: not an AIMG1 file")
    w, h, c = struct.unpack_from("<III", data, 5)
    off = 5 + 12
    n = w * h * c
    channels = np.frombuffer(data, dtype="<f4", count=n, offset=off).reshape(h, w, c).astype(np.float64)
    off += 4 * n
    bits = np.frombuffer(data, dtype=np.uint8, offset=off)
    mask = np.unpackbits(bits)[: w * h].reshape(h, w).astype(bool)
    return AttributeImage(channels, mask)
