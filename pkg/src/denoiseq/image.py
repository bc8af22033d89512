"""Image containers and primitive raster operations.

An image is a plain numpy float64 array with samples in [0, 255]:
shape (H, W) for grayscale, (H, W, 3) for RGB. All functions here are
pure; arrays are never modified in place.

Supported file formats are binary PGM (P5), binary PPM (P6), and 8-bit
PNG. 16-bit sources are rescaled to the [0, 255] range on load.
"""

from __future__ import annotations

import io
from collections import namedtuple
from pathlib import Path

import numpy as np

Gradient = namedtuple("Gradient", ["dx", "dy", "magnitude"])


def clip_to_range(img):
    """Clamp samples to [0, 255] after range-breaking arithmetic."""
    return np.clip(img, 0.0, 255.0)


def channel_count(img):
    if img.ndim == 2:
        return 1
    if img.ndim == 3 and img.shape[2] == 3:
        return 3
    raise ValueError(f"expected (H, W) or (H, W, 3) image, got shape {img.shape}")


def channels(img):
    """Iterate over the 2-D channel planes of an image."""
    if img.ndim == 2:
        yield img
    else:
        for c in range(img.shape[2]):
            yield img[:, :, c]


def require_same_shape(a, b):
    if a.shape != b.shape:
        raise ValueError(f"image dimension mismatch: {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# file I/O


def _read_pnm_header(stream):
    """Parse PNM header tokens, skipping whitespace and '#' comments."""
    tokens = []
    while len(tokens) < 4:
        ch = stream.read(1)
        if not ch:
            raise ValueError("unexpected end of stream")
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = stream.read(1)
            continue
        if ch.isspace():
            continue
        tok = ch
        while True:
            ch = stream.read(1)
            if not ch or ch.isspace():
                break
            if ch == b"#":  # comment glued to a token
                while ch not in (b"\n", b""):
                    ch = stream.read(1)
                break
            tok += ch
        tokens.append(tok)
    return tokens


def _load_pnm(data: bytes):
    stream = io.BytesIO(data)
    magic, w_tok, h_tok, max_tok = _read_pnm_header(stream)
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"unsupported PNM magic {magic!r} (only binary P5/P6)")
    try:
        width, height, maxval = int(w_tok), int(h_tok), int(max_tok)
    except ValueError as exc:
        raise ValueError(f"malformed PNM header: {exc}") from exc
    if width <= 0 or height <= 0:
        raise ValueError(f"zero-dimension image ({width}x{height})")
    if not 0 < maxval < 65536:
        raise ValueError(f"invalid PNM maxval {maxval}")

    nchan = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    count = width * height * nchan
    raw = stream.read(count * dtype.itemsize)
    if len(raw) < count * dtype.itemsize:
        raise ValueError("unexpected end of stream")
    arr = np.frombuffer(raw, dtype=dtype).astype(np.float64)
    if maxval > 255:
        arr *= 255.0 / maxval
    if nchan == 3:
        return arr.reshape(height, width, 3)
    return arr.reshape(height, width)


def _load_png(path: Path):
    from PIL import Image as PILImage

    with PILImage.open(path) as im:
        im.load()
        if im.mode in ("P", "RGBA", "LA"):
            im = im.convert("RGB" if im.mode != "LA" else "L")
        if im.mode in ("I", "I;16", "I;16B", "I;16L"):
            arr = np.asarray(im, dtype=np.float64) * (255.0 / 65535.0)
        elif im.mode in ("L", "RGB"):
            arr = np.asarray(im, dtype=np.float64)
        else:
            raise ValueError(f"unsupported PNG mode {im.mode!r}")
    if arr.size == 0:
        raise ValueError("zero-dimension image")
    return arr


def load_image(path):
    """Load a PGM/PPM/PNG file as a float image in [0, 255]."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head in (b"P5", b"P6"):
        return _load_pnm(path.read_bytes())
    if head == b"\x89P":
        return _load_png(path)
    raise ValueError(f"unsupported image format in {path}")


def save_image(img, path):
    """Write an image; the extension picks the format (.pgm/.ppm/.png).

    Samples are rounded to 8 bits, so a save/load round trip moves each
    sample by at most 0.5.
    """
    path = Path(path)
    nchan = channel_count(img)
    quant = np.rint(clip_to_range(np.asarray(img, dtype=np.float64)))
    quant = quant.astype(np.uint8)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        if nchan != 1:
            raise ValueError("PGM stores single-channel images only")
        header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
        path.write_bytes(header + quant.tobytes())
    elif suffix == ".ppm":
        if nchan != 3:
            raise ValueError("PPM stores 3-channel images only")
        header = f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
        path.write_bytes(header + quant.tobytes())
    elif suffix == ".png":
        from PIL import Image as PILImage

        mode = "L" if nchan == 1 else "RGB"
        PILImage.fromarray(quant, mode=mode).save(path, format="PNG")
    else:
        raise ValueError(f"unsupported save extension {suffix!r}")


# ---------------------------------------------------------------------------
# raster primitives


def to_grayscale(img):
    """Collapse RGB to luminance (0.299 R + 0.587 G + 0.114 B)."""
    if channel_count(img) == 1:
        return img
    return img[:, :, 0] * 0.299 + img[:, :, 1] * 0.587 + img[:, :, 2] * 0.114


def gradient_field(img):
    """Forward-difference gradient of a single-channel image.

    dx(x, y) = I(x+1, y) - I(x, y) with the last column zero; dy is the
    vertical analogue with the last row zero.
    """
    if channel_count(img) != 1:
        raise ValueError("gradient_field expects a single-channel image")
    dx = np.zeros_like(img, dtype=np.float64)
    dy = np.zeros_like(img, dtype=np.float64)
    dx[:, :-1] = img[:, 1:] - img[:, :-1]
    dy[:-1, :] = img[1:, :] - img[:-1, :]
    return Gradient(dx, dy, np.sqrt(dx * dx + dy * dy))


def extract_patches(img, k=15):
    """Tile a single-channel image into non-overlapping k-by-k patches.

    Returns a (k*k, count) matrix: one vectorized patch per column,
    patches ordered left-to-right then top-to-bottom, each patch
    flattened column-major. Partial tiles at the right/bottom border are
    discarded.
    """
    if channel_count(img) != 1:
        raise ValueError("extract_patches expects a single-channel image")
    h, w = img.shape
    if h < k or w < k:
        raise ValueError(f"image {w}x{h} smaller than patch size {k}")
    ph, pw = h // k, w // k
    tiles = img[: ph * k, : pw * k].reshape(ph, k, pw, k)
    # axes (tile row, tile col, patch col, patch row) -> column-major vectors
    cols = tiles.transpose(0, 2, 3, 1).reshape(ph * pw, k * k)
    return np.ascontiguousarray(cols.T)


def noise_map(noisy, denoised):
    """Difference raster denoised - noisy; deliberately not clamped."""
    require_same_shape(noisy, denoised)
    return np.asarray(denoised, dtype=np.float64) - np.asarray(noisy, dtype=np.float64)
