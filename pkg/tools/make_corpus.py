"""Regenerate the bundled clean-image corpus (src/denoiseq/data/corpus).

Classic test photographs come from scikit-image's public-domain sample
data (generation-time dependency only); the rest are procedural textures,
edges, and cartoon scenes. Everything is cropped/box-averaged to 128x128
and written as 8-bit PNG, so the corpus is fully deterministic and ships
with the package.

Run from the repository root:  python tools/make_corpus.py
"""

from pathlib import Path

import numpy as np
import skimage.data

from denoiseq.denoisers import gaussian_filter
from denoiseq.image import save_image

SIZE = 128
OUT = Path(__file__).resolve().parent.parent / "src" / "denoiseq" / "data" / "corpus"

CLASSICS_GRAY = ["camera", "coins", "moon", "page", "clock", "brick", "grass", "gravel", "cell", "text"]
CLASSICS_COLOR = ["astronaut", "coffee", "chelsea", "immunohistochemistry"]


def shrink(img):
    """Center-crop to a multiple of SIZE and box-average down to SIZE."""
    h, w = img.shape[:2]
    factor = min(h, w) // SIZE
    ch, cw = SIZE * factor, SIZE * factor
    top, left = (h - ch) // 2, (w - cw) // 2
    crop = img[top : top + ch, left : left + cw].astype(np.float64)
    if crop.ndim == 2:
        return crop.reshape(SIZE, factor, SIZE, factor).mean(axis=(1, 3))
    return crop.reshape(SIZE, factor, SIZE, factor, 3).mean(axis=(1, 3))


def stretch(img, lo=5.0, hi=250.0):
    mn, mx = img.min(), img.max()
    if mx == mn:
        return np.full_like(img, (lo + hi) / 2)
    return lo + (img - mn) * (hi - lo) / (mx - mn)


def voronoi_cartoon(rng, cells=18):
    seeds = rng.uniform(0, SIZE, size=(cells, 2))
    values = rng.uniform(20, 235, size=cells)
    y, x = np.mgrid[0:SIZE, 0:SIZE]
    d = (x[..., None] - seeds[:, 0]) ** 2 + (y[..., None] - seeds[:, 1]) ** 2
    return values[np.argmin(d, axis=-1)]


def blob_field(rng, count=25):
    y, x = np.mgrid[0:SIZE, 0:SIZE]
    img = np.zeros((SIZE, SIZE))
    for _ in range(count):
        cx, cy = rng.uniform(0, SIZE, 2)
        s = rng.uniform(4, 18)
        a = rng.uniform(-80, 80)
        img += a * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * s * s))
    return stretch(img)


def smooth_texture(rng, blur):
    return stretch(gaussian_filter(rng.uniform(0, 255, (SIZE, SIZE)), blur))


def grating(freq, angle, amplitude=90.0):
    y, x = np.mgrid[0:SIZE, 0:SIZE]
    t = np.cos(angle) * x + np.sin(angle) * y
    return 128.0 + amplitude * np.sin(2 * np.pi * freq * t / SIZE)


def bars(rng, n=10, horizontal=False):
    levels = rng.permutation(np.linspace(15, 240, n))
    strip = np.repeat(levels, int(np.ceil(SIZE / n)))[:SIZE]
    img = np.tile(strip, (SIZE, 1))
    return img.T if horizontal else img


def rings():
    y, x = np.mgrid[0:SIZE, 0:SIZE]
    r = np.sqrt((x - SIZE / 2) ** 2 + (y - SIZE / 2) ** 2)
    return 128.0 + 100.0 * np.sin(r / 4.5)


def wedge_and_disks(rng):
    y, x = np.mgrid[0:SIZE, 0:SIZE]
    img = x * (200.0 / SIZE) + 25.0
    for _ in range(6):
        cx, cy = rng.uniform(12, SIZE - 12, 2)
        rad = rng.uniform(6, 16)
        img = np.where((x - cx) ** 2 + (y - cy) ** 2 <= rad * rad, rng.uniform(10, 245), img)
    return img


def half_and_half(rng):
    left = voronoi_cartoon(rng, cells=10)
    right = smooth_texture(rng, 1.0)
    img = left.copy()
    img[:, SIZE // 2 :] = right[:, SIZE // 2 :]
    return img


def procedural_images():
    imgs = {}
    rng = np.random.default_rng(20240601)
    for i in range(5):
        imgs[f"cartoon{i}"] = voronoi_cartoon(np.random.default_rng(100 + i))
    for i, blur in enumerate((0.8, 1.5, 3.0)):
        imgs[f"texture{i}"] = smooth_texture(np.random.default_rng(200 + i), blur)
    imgs["grating0"] = grating(6.0, 0.3)
    imgs["grating1"] = grating(14.0, 1.2)
    imgs["plaid"] = stretch(grating(6.0, 0.0) + grating(9.0, np.pi / 2))
    imgs["bars0"] = bars(np.random.default_rng(300))
    imgs["bars1"] = bars(np.random.default_rng(301), horizontal=True)
    imgs["rings"] = rings()
    for i in range(2):
        imgs[f"blobs{i}"] = blob_field(np.random.default_rng(400 + i))
    imgs["wedge"] = wedge_and_disks(np.random.default_rng(500))
    imgs["mixed"] = half_and_half(np.random.default_rng(600))
    assert len(imgs) == 18
    return imgs


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    written = []
    for name in CLASSICS_GRAY:
        img = shrink(getattr(skimage.data, name)())
        written.append((f"c_{name}", img))
    for name in CLASSICS_COLOR:
        img = shrink(getattr(skimage.data, name)())
        written.append((f"c_{name}", img))
    for name, img in sorted(procedural_images().items()):
        written.append((f"p_{name}", img))
    for name, img in written:
        save_image(np.clip(img, 0, 255), OUT / f"{name}.png")
    print(f"wrote {len(written)} images to {OUT}")


if __name__ == "__main__":
    main()
