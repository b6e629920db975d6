"""Grayscale image file I/O.

Reads 8- and 16-bit grayscale PGM (binary P5) and PNG files, rescaling
intensities to [0, 1].  Writes 8-bit binary PGM.  Row-major, origin at
the top-left corner.
"""

import numpy as np
from PIL import Image, UnidentifiedImageError

from ._validation import check_image
from .exceptions import ImageFormatError


def _read_pgm_tokens(data, count):
    """Pull ``count`` whitespace-separated header tokens, skipping comments.

    Returns (tokens, offset of the first data byte).
    """
    tokens = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise ImageFormatError("truncated PGM header")
        c = data[i : i + 1]
        if c == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    # exactly one whitespace byte separates the header from the raster
    if i >= len(data) or not data[i : i + 1].isspace():
        raise ImageFormatError("malformed PGM header")
    return tokens, i + 1


def _load_pgm(data, path):
    tokens, offset = _read_pgm_tokens(data, 4)
    if tokens[0] != b"P5":
        raise ImageFormatError(f"{path}: unsupported PGM magic {tokens[0]!r} (only binary P5)")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ImageFormatError(f"{path}: non-numeric PGM header") from exc
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"{path}: bad PGM dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise ImageFormatError(f"{path}: PGM maxval {maxval} out of range")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    expect = width * height * dtype.itemsize
    raster = data[offset : offset + expect]
    if len(raster) != expect:
        raise ImageFormatError(f"{path}: PGM raster truncated")
    arr = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return arr.astype(np.float64) / maxval


def _load_png(path):
    try:
        with Image.open(path) as im:
            mode = im.mode
            if mode == "L":
                arr, scale = np.asarray(im, dtype=np.float64), 255.0
            elif mode in ("I", "I;16"):
                arr, scale = np.asarray(im, dtype=np.float64), 65535.0
            elif mode == "1":
                arr, scale = np.asarray(im.convert("L"), dtype=np.float64), 255.0
            else:
                raise ImageFormatError(
                    f"{path}: unsupported PNG mode {mode!r} "
                    "(need 8- or 16-bit single-channel grayscale)"
                )
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"{path}: not a recognizable image file") from exc
    if arr.max(initial=0.0) > scale:
        raise ImageFormatError(f"{path}: sample values exceed declared bit depth")
    return arr / scale


def load_image(path):
    """Load a grayscale PGM or PNG file as a float64 array in [0, 1].

    Raises OSError for unreadable files and ImageFormatError for color
    images or unsupported formats/depths.
    """
    path = str(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] == b"P5":
        img = _load_pgm(data, path)
    elif data[:2] == b"P2":
        raise ImageFormatError(f"{path}: ASCII PGM (P2) not supported, need binary P5")
    elif data[:8] == b"\x89PNG\r\n\x1a\n":
        img = _load_png(path)
    else:
        raise ImageFormatError(f"{path}: not a PGM (P5) or PNG file")
    return np.clip(img, 0.0, 1.0)


def save_image(img, path):
    """Write an image as binary PGM (P5, maxval 255).

    A load/save round trip preserves every pixel to within 1/255.
    """
    img = check_image(img)
    h, w = img.shape
    quantized = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    with open(str(path), "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(quantized.tobytes())
