"""Full-reference quality metrics and evaluation statistics.

PSNR and SSIM follow the 8-bit convention (peak 255, SSIM constants
C1 = (0.01*255)^2 and C2 = (0.03*255)^2). Kendall's tau and RMSE/RSE
support the ranking and regression studies.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from .image import channel_count, channels, require_same_shape

C1 = (0.01 * 255.0) ** 2
C2 = (0.03 * 255.0) ** 2

PSNR_CAP = 100.0


def psnr(a, b):
    """Peak signal-to-noise ratio in dB, capped at 100 for identical inputs.

    The MSE is averaged over all samples and channels; no clamping is
    applied to the inputs.
    """
    require_same_shape(a, b)
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(255.0**2 / mse)))


def _gaussian_window(size, sigma):
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    w2 = np.outer(w, w)
    return w2 / w2.sum()


def _valid_box_mean(img, k):
    """Mean over every fully-interior k-by-k window, via integral images."""
    s = np.cumsum(np.cumsum(img, axis=0), axis=1)
    s = np.pad(s, ((1, 0), (1, 0)))
    total = s[k:, k:] - s[:-k, k:] - s[k:, :-k] + s[:-k, :-k]
    return total / (k * k)


def ssim_map(a, b, window="gaussian", size=11, sigma=1.5):
    """Per-window SSIM map between two single-channel images.

    window="gaussian" weights each window with a sampled Gaussian
    (default 11x11, sigma 1.5); window="uniform" uses an unweighted
    size-by-size box. The map covers valid window positions only, so its
    shape is (H - size + 1, W - size + 1).
    """
    require_same_shape(a, b)
    if channel_count(a) != 1:
        raise ValueError("ssim_map expects single-channel images")
    if a.shape[0] < size or a.shape[1] < size:
        raise ValueError(f"image {a.shape} smaller than {size}x{size} window")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)

    if window == "gaussian":
        w = _gaussian_window(size, sigma)

        def local_mean(x):
            return fftconvolve(x, w, mode="valid")

    elif window == "uniform":

        def local_mean(x):
            return _valid_box_mean(x, size)

    else:
        raise ValueError(f"unknown window {window!r}")

    mu_a = local_mean(a)
    mu_b = local_mean(b)
    s_aa = local_mean(a * a) - mu_a * mu_a
    s_bb = local_mean(b * b) - mu_b * mu_b
    s_ab = local_mean(a * b) - mu_a * mu_b

    num = (2.0 * mu_a * mu_b + C1) * (2.0 * s_ab + C2)
    den = (mu_a * mu_a + mu_b * mu_b + C1) * (s_aa + s_bb + C2)
    return num / den


def ssim(a, b):
    """Mean SSIM with the standard 11x11 Gaussian window.

    Color images are scored per channel and the three scalars averaged.
    """
    require_same_shape(a, b)
    if channel_count(a) == 3:
        return float(np.mean([ssim(ca, cb) for ca, cb in zip(channels(a), channels(b))]))
    return float(np.mean(ssim_map(a, b)))


def _merge_count(vals):
    # inversion counting by merge sort
    n = len(vals)
    if n < 2:
        return 0, vals
    mid = n // 2
    inv_l, left = _merge_count(vals[:mid])
    inv_r, right = _merge_count(vals[mid:])
    merged = []
    inv = inv_l + inv_r
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            merged.append(right[j])
            inv += len(left) - i
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    return inv, merged


def kendall_tau(predicted, truth):
    """Kendall rank correlation between two orderings of the same ids.

    tau = (concordant - discordant) / (n (n-1) / 2), in [-1, 1].
    Both arguments must be permutations of the same id set, n >= 2.
    """
    predicted = list(predicted)
    truth = list(truth)
    if len(predicted) != len(truth):
        raise ValueError("rankings differ in length")
    n = len(truth)
    if n < 2:
        raise ValueError("need at least two ranked items")
    if len(set(predicted)) != n or set(predicted) != set(truth):
        raise ValueError("rankings must be permutations of the same id set")
    pos = {item: i for i, item in enumerate(predicted)}
    seq = [pos[item] for item in truth]
    discordant, _ = _merge_count(seq)
    total = n * (n - 1) // 2
    return float((total - 2 * discordant) / total)


def rmse_rse(predicted, truth):
    """Root-mean-squared error and relative squared error of predictions.

    rse normalizes the squared error by the truth's variance around its
    mean; it is undefined (raises) for constant truth.
    """
    p = np.asarray(predicted, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1 or p.size == 0:
        raise ValueError("predicted and truth must be equal-length nonempty vectors")
    sq = float(np.sum((p - t) ** 2))
    rmse = float(np.sqrt(sq / p.size))
    denom = float(np.sum((t - t.mean()) ** 2))
    if denom == 0.0:
        raise ValueError("relative squared error undefined for constant truth")
    return rmse, sq / denom
