"""Five classical denoisers, their benchmark parameter grids, and dispatch.

Grid values are ordered by smoothing strength. Methods whose natural
parameter scales with the noise level (non-local means, DCT threshold)
express their grid as multipliers of the per-image noise estimate. Three
methods additionally declare a continuous tuning parameter theta:
gaussian_filter (sigma), bilateral (range sigma), and nlm (multiplier of
the estimated noise level).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import dctn, idctn
from scipy.ndimage import correlate1d, median_filter as _nd_median, uniform_filter

from .image import channel_count, clip_to_range
from .noise import estimate_noise_sigma

METHODS = ("gaussian_filter", "bilateral", "median", "nlm", "dct")

GRIDS = {
    "gaussian_filter": (0.8, 1.5, 2.5),
    "bilateral": ((2.0, 10.0), (2.0, 25.0), (2.0, 50.0), (2.0, 100.0)),
    "median": (1, 2, 3),
    "nlm": (0.6, 1.0, 1.4, 1.8),
    "dct": (2.0, 3.0, 4.0),
}

# continuous tuning ranges; bilateral tunes its range sigma at fixed
# spatial sigma, nlm tunes the noise-level multiplier
THETA_BOUNDS = {
    "gaussian_filter": (0.3, 5.0),
    "bilateral": (5.0, 100.0),
    "nlm": (0.2, 3.0),
}
BILATERAL_TUNE_SIGMA_S = 2.0

RESULTS_PER_IMAGE = sum(len(g) for g in GRIDS.values())


def _per_channel(fn, img):
    if channel_count(img) == 1:
        return fn(img)
    return np.dstack([fn(img[:, :, c]) for c in range(3)])


def gaussian_filter(img, sigma):
    """Separable Gaussian smoothing, kernel radius ceil(3 sigma),
    symmetric boundary reflection."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    w /= w.sum()

    def run(plane):
        out = correlate1d(plane, w, axis=0, mode="reflect")
        return clip_to_range(correlate1d(out, w, axis=1, mode="reflect"))

    return _per_channel(run, img)


def bilateral_filter(img, sigma_s, sigma_r):
    """Range-and-space weighted mean over a radius ceil(2 sigma_s) window."""
    if sigma_s <= 0 or sigma_r <= 0:
        raise ValueError("sigmas must be positive")
    radius = math.ceil(2.0 * sigma_s)
    inv_s = -0.5 / (sigma_s * sigma_s)
    inv_r = -0.5 / (sigma_r * sigma_r)

    def run(plane):
        h, w = plane.shape
        padded = np.pad(plane, radius, mode="symmetric")
        num = np.zeros_like(plane)
        den = np.zeros_like(plane)
        for dy in range(-radius, radius + 1):
            for dx in range(-radius, radius + 1):
                ws = math.exp((dy * dy + dx * dx) * inv_s)
                shifted = padded[radius + dy : radius + dy + h, radius + dx : radius + dx + w]
                diff = shifted - plane
                wgt = ws * np.exp(diff * diff * inv_r)
                num += wgt * shifted
                den += wgt
        return clip_to_range(num / den)

    return _per_channel(run, img)


def median_filter(img, radius):
    """Median over a (2r+1)^2 window with reflected boundaries."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    size = 2 * radius + 1
    return _per_channel(lambda p: _nd_median(p, size=size, mode="reflect"), img)


def nlm(img, h, patch_radius=2, search_radius=7):
    """Non-local means with noise-compensated patch distances.

    Weights are exp(-max(d2 - 2 sigma^2, 0) / h^2) where d2 is the mean
    squared patch difference and sigma the estimated noise level; the
    center pixel reuses the maximum weight seen among its neighbors.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if patch_radius < 1 or search_radius < 1:
        raise ValueError("radii must be >= 1")

    def run(plane):
        hh, ww = plane.shape
        f, s = patch_radius, search_radius
        offset = 2.0 * estimate_noise_sigma(plane) ** 2
        inv_h2 = 1.0 / (h * h)
        big = np.pad(plane, f + s, mode="symmetric")
        base = big[s : s + hh + 2 * f, s : s + ww + 2 * f]
        num = np.zeros_like(plane)
        den = np.zeros_like(plane)
        wmax = np.zeros_like(plane)
        for dy in range(-s, s + 1):
            for dx in range(-s, s + 1):
                if dy == 0 and dx == 0:
                    continue
                frame = big[s + dy : s + dy + hh + 2 * f, s + dx : s + dx + ww + 2 * f]
                d2 = (base - frame) ** 2
                ssd = uniform_filter(d2, size=2 * f + 1)[f:-f, f:-f]
                wgt = np.exp(-np.maximum(ssd - offset, 0.0) * inv_h2)
                np.maximum(wmax, wgt, out=wmax)
                centers = big[f + s + dy : f + s + dy + hh, f + s + dx : f + s + dx + ww]
                num += wgt * centers
                den += wgt
        num += wmax * plane
        den += wmax
        out = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), plane)
        return clip_to_range(out)

    return _per_channel(run, img)


def dct_denoise(img, threshold, block=8, stride=4):
    """Sliding-block DCT hard thresholding.

    Orthonormal 2-D DCT over block-by-block tiles placed every `stride`
    pixels (plus tail positions so the borders are covered); non-DC
    coefficients with magnitude below `threshold` are zeroed and the
    overlapping reconstructions averaged uniformly.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")

    def run(plane):
        h, w = plane.shape
        if h < block or w < block:
            raise ValueError(f"image {w}x{h} smaller than DCT block {block}")
        ys = list(range(0, h - block + 1, stride))
        if ys[-1] != h - block:
            ys.append(h - block)
        xs = list(range(0, w - block + 1, stride))
        if xs[-1] != w - block:
            xs.append(w - block)
        r = np.asarray(ys)[:, None] + np.arange(block)[None, :]
        c = np.asarray(xs)[:, None] + np.arange(block)[None, :]
        rows = r[:, None, :, None]
        cols = c[None, :, None, :]
        blocks = plane[rows, cols]
        coef = dctn(blocks, axes=(2, 3), norm="ortho")
        small = np.abs(coef) < threshold
        small[..., 0, 0] = False
        coef[small] = 0.0
        rec = idctn(coef, axes=(2, 3), norm="ortho")
        acc = np.zeros_like(plane)
        cnt = np.zeros_like(plane)
        np.add.at(acc, (rows, cols), rec)
        np.add.at(cnt, (rows, cols), 1.0)
        return clip_to_range(acc / cnt)

    return _per_channel(run, img)


@dataclass(frozen=True)
class DenoiserId:
    """A method plus either a grid index or a continuous tuning value."""

    method: str
    index: int | None = None
    theta: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown denoiser {self.method!r}")
        if (self.index is None) == (self.theta is None):
            raise ValueError("specify exactly one of index or theta")
        if self.index is not None and not 0 <= self.index < len(GRIDS[self.method]):
            raise ValueError(f"{self.method} grid index {self.index} out of range")
        if self.theta is not None:
            if self.method not in THETA_BOUNDS:
                raise ValueError(f"{self.method} has no continuous tuning parameter")
            lo, hi = THETA_BOUNDS[self.method]
            if not lo <= self.theta <= hi:
                raise ValueError(f"theta {self.theta} outside [{lo}, {hi}]")

    def key(self):
        if self.index is not None:
            return f"{self.method}:{self.index}"
        return f"{self.method}:theta={self.theta!r}"

    @classmethod
    def parse(cls, key):
        method, _, arg = key.partition(":")
        if arg.startswith("theta="):
            return cls(method, theta=float(arg[6:]))
        return cls(method, index=int(arg))


def grid_ids(method=None):
    """All benchmark DenoiserIds, or those of a single method."""
    methods = METHODS if method is None else (method,)
    return [DenoiserId(m, index=i) for m in methods for i in range(len(GRIDS[m]))]


def denoise(img, denoiser):
    """Run the denoiser named by a DenoiserId; color images go per channel."""

    def run(plane):
        method = denoiser.method
        if method == "gaussian_filter":
            sigma = GRIDS[method][denoiser.index] if denoiser.theta is None else denoiser.theta
            return gaussian_filter(plane, sigma)
        if method == "bilateral":
            if denoiser.theta is None:
                sigma_s, sigma_r = GRIDS[method][denoiser.index]
            else:
                sigma_s, sigma_r = BILATERAL_TUNE_SIGMA_S, denoiser.theta
            return bilateral_filter(plane, sigma_s, sigma_r)
        if method == "median":
            return median_filter(plane, GRIDS[method][denoiser.index])
        sigma_hat = estimate_noise_sigma(plane)
        if method == "nlm":
            mult = GRIDS[method][denoiser.index] if denoiser.theta is None else denoiser.theta
            return nlm(plane, max(mult * sigma_hat, 1e-8))
        mult = GRIDS[method][denoiser.index]
        return dct_denoise(plane, mult * sigma_hat)

    return _per_channel(run, img)
