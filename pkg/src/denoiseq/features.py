"""Denoising-quality features extracted from a (noisy, denoised) pair.

Six families make up the 19-dimensional feature vector, in this fixed
order:

  ss_97 ss_98 ss_99   patch self-similarity at three energy fractions
  sr_1 sr_2 sr_3      structural residual at three guidance scales
  sgm_40 sgm_50 sgm_60  spread of the smallest gradient magnitudes
  sc_6 sc_8 sc_10     structure correlation at three window sizes
  vr_1 .. vr_6        variational energies (norm pair x lambda)
  gh                  gradient-histogram distance to a denoised target

Color pairs are processed per channel and the three vectors averaged.
All functions are deterministic and free of shared state.
"""

from __future__ import annotations

import math

import numpy as np

from .image import (
    channel_count,
    channels,
    clip_to_range,
    extract_patches,
    gradient_field,
    noise_map,
    require_same_shape,
)
from .metrics import ssim_map
from .noise import estimate_noise_sigma
from .svdvals import partial_energy_count, singular_values

PATCH_SIZE = 15
SS_ALPHAS = (0.97, 0.98, 0.99)

# (sigma_d, sigma_s, sigma_c): spatial, structure, and intensity scales
SR_PRESETS = ((1.0, 1.0, 4.0), (4.0, 4.0, 10.0), (10.0, 10.0, 30.0))

SGM_PERCENTS = (40, 50, 60)

SC_WINDOWS = (6, 8, 10)

# (data norm, smoothness norm, lambda); norm 1 is sum of absolutes,
# norm 2 the squared Euclidean norm
VR_PRESETS = ((1, 1, 0.5), (1, 1, 1.0), (2, 1, 0.5), (2, 1, 1.0), (2, 2, 0.5), (2, 2, 1.0))

GH_BINS = 100
GH_MAX_MAGNITUDE = 255.0 * math.sqrt(2.0)
GH_DIFF_RANGE = 255
GH_DECONV_ITERS = 30

FEATURE_NAMES = (
    "ss_97",
    "ss_98",
    "ss_99",
    "sr_1",
    "sr_2",
    "sr_3",
    "sgm_40",
    "sgm_50",
    "sgm_60",
    "sc_6",
    "sc_8",
    "sc_10",
    "vr_1",
    "vr_2",
    "vr_3",
    "vr_4",
    "vr_5",
    "vr_6",
    "gh",
)

FAMILIES = {
    "ss": slice(0, 3),
    "sr": slice(3, 6),
    "sgm": slice(6, 9),
    "sc": slice(9, 12),
    "vr": slice(12, 18),
    "gh": slice(18, 19),
}


def self_similarity(denoised):
    """Fraction of singular values carrying an alpha share of the patch
    matrix energy; low values mean highly redundant (smooth) patches."""
    mat = extract_patches(denoised, PATCH_SIZE)
    s = singular_values(mat)
    return np.array([partial_energy_count(s, a) / len(s) for a in SS_ALPHAS])


def _guided_average(resid, guide, guide_grad, sigma_d, sigma_s, sigma_c):
    # float32 internally: the window accumulation is exp-throughput bound
    # and the result only feeds a feature value
    radius = math.ceil(2.0 * sigma_d)
    inv_d = -0.5 / (sigma_d * sigma_d)
    inv_s = np.float32(-0.5 / (sigma_s * sigma_s))
    inv_c = np.float32(-0.5 / (sigma_c * sigma_c))
    h, w = resid.shape
    guide = np.asarray(guide, dtype=np.float32)
    guide_grad = np.asarray(guide_grad, dtype=np.float32)
    pad_r = np.pad(np.asarray(resid, dtype=np.float32), radius, mode="symmetric")
    pad_i = np.pad(guide, radius, mode="symmetric")
    pad_g = np.pad(guide_grad, radius, mode="symmetric")
    num = np.zeros((h, w), dtype=np.float32)
    den = np.zeros((h, w), dtype=np.float32)
    t = np.empty((h, w), dtype=np.float32)
    t2 = np.empty((h, w), dtype=np.float32)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            # spatial weight folded into the exponent
            log_wd = np.float32((dy * dy + dx * dx) * inv_d)
            ys, xs = radius + dy, radius + dx
            np.subtract(pad_i[ys : ys + h, xs : xs + w], guide, out=t)
            np.multiply(t, t, out=t)
            t *= inv_c
            np.subtract(pad_g[ys : ys + h, xs : xs + w], guide_grad, out=t2)
            np.multiply(t2, t2, out=t2)
            t2 *= inv_s
            t += t2
            t += log_wd
            np.exp(t, out=t)
            den += t
            t *= pad_r[ys : ys + h, xs : xs + w]
            num += t
    return (num / den).astype(np.float64)


def structural_residual(noisy, denoised):
    """RMS of the noise map after structure-guided averaging.

    The average at each pixel weights nearby noise samples by spatial
    distance and by intensity / gradient-magnitude similarity in the
    noisy image, so uncorrelated noise cancels while leaked structure
    survives. One value per guidance scale preset.
    """
    require_same_shape(noisy, denoised)
    resid = noise_map(noisy, denoised)
    grad = gradient_field(noisy).magnitude
    out = np.empty(len(SR_PRESETS))
    for i, (sd, ss_, sc) in enumerate(SR_PRESETS):
        smoothed = _guided_average(resid, noisy, grad, sd, ss_, sc)
        out[i] = math.sqrt(float(np.mean(smoothed * smoothed)))
    return out


def small_gradient_spread(denoised):
    """Standard deviation of the m% smallest non-zero gradient magnitudes
    (m = 40, 50, 60); residual noise in flat regions inflates it."""
    mag = gradient_field(denoised).magnitude
    nz = np.sort(mag[mag > 0.0])
    out = np.zeros(len(SGM_PERCENTS))
    for i, m in enumerate(SGM_PERCENTS):
        take = int(nz.size * m / 100)
        if take > 0:
            out[i] = float(np.std(nz[:take]))
    return out


def _pearson(a, b):
    a = a.ravel()
    b = b.ravel()
    da = a - a.mean()
    db = b - b.mean()
    denom = math.sqrt(float(np.dot(da, da)) * float(np.dot(db, db)))
    if denom == 0.0:
        return None
    return float(np.dot(da, db)) / denom


def structure_correlation(noisy, denoised):
    """Negative correlation between SSIM(denoised, noisy) and
    SSIM(noise map, noisy) maps; one value per uniform window size.

    A good result keeps structure (high similarity to the noisy input in
    textured areas) while its noise map resembles the noisy input only
    in flat areas, making the two maps anticorrelated. Zero-variance
    maps (e.g. the identity denoiser) return 0.
    """
    require_same_shape(noisy, denoised)
    shifted = clip_to_range(noise_map(noisy, denoised) + 128.0)
    out = np.zeros(len(SC_WINDOWS))
    for i, k in enumerate(SC_WINDOWS):
        a = ssim_map(denoised, noisy, window="uniform", size=k)
        b = ssim_map(shifted, noisy, window="uniform", size=k)
        corr = _pearson(a, b)
        out[i] = 0.0 if corr is None else -corr
    return out


def variational_energy(noisy, denoised):
    """Per-pixel variational denoising energy of the result.

    Data term distance(noisy, denoised) plus lambda times the gradient
    penalty of the result, for six (norm pair, lambda) presets. Norm 1
    is the sum of absolute values; norm 2 is the squared Euclidean norm.
    """
    require_same_shape(noisy, denoised)
    diff = noisy - denoised
    grad = gradient_field(denoised)
    n = denoised.size
    data = {1: float(np.sum(np.abs(diff))), 2: float(np.sum(diff * diff))}
    smooth = {
        1: float(np.sum(np.abs(grad.dx)) + np.sum(np.abs(grad.dy))),
        2: float(np.sum(grad.dx**2) + np.sum(grad.dy**2)),
    }
    return np.array([(data[ld] + lam * smooth[ls]) / n for ld, ls, lam in VR_PRESETS])


_GH_BIN_INDEX_CACHE = {}


def _magnitude_bin_index():
    # maps a (dx, dy) integer-difference cell to its magnitude bin
    key = (GH_DIFF_RANGE, GH_BINS)
    if key not in _GH_BIN_INDEX_CACHE:
        offsets = np.arange(-GH_DIFF_RANGE, GH_DIFF_RANGE + 1, dtype=np.float64)
        mag = np.sqrt(offsets[:, None] ** 2 + offsets[None, :] ** 2)
        idx = np.minimum((mag / GH_MAX_MAGNITUDE * GH_BINS).astype(np.int64), GH_BINS - 1)
        _GH_BIN_INDEX_CACHE[key] = idx
    return _GH_BIN_INDEX_CACHE[key]


def _difference_histogram(diffs):
    hist, _ = np.histogram(
        diffs, bins=2 * GH_DIFF_RANGE + 1, range=(-GH_DIFF_RANGE - 0.5, GH_DIFF_RANGE + 0.5)
    )
    hist = hist.astype(np.float64)
    return hist / hist.sum()


def _deconvolve(hist, sigma):
    """Non-negative multiplicative (Richardson-Lucy style) deconvolution
    of a difference histogram against a Gaussian blur kernel."""
    if sigma < 1e-12:
        return hist.copy()
    half = min(max(1, math.ceil(4.0 * sigma)), GH_DIFF_RANGE)
    x = np.arange(-half, half + 1, dtype=np.float64)
    kernel = np.exp(-(x * x) / (2.0 * sigma * sigma))
    kernel /= kernel.sum()
    est = hist.copy()
    for _ in range(GH_DECONV_ITERS):
        blurred = np.convolve(est, kernel, mode="same")
        ratio = np.where(blurred > 1e-12, hist / np.where(blurred > 1e-12, blurred, 1.0), 0.0)
        est *= np.convolve(ratio, kernel, mode="same")
    total = est.sum()
    return est / total if total > 0 else est


def _magnitude_histogram(img):
    dx = img[:-1, 1:] - img[:-1, :-1]
    dy = img[1:, :-1] - img[:-1, :-1]
    mag = np.sqrt(dx * dx + dy * dy)
    hist, _ = np.histogram(mag, bins=GH_BINS, range=(0.0, GH_MAX_MAGNITUDE))
    hist = hist.astype(np.float64)
    return hist / hist.sum()


def gradient_histogram_distance(noisy, denoised):
    """L1 distance between the result's gradient-magnitude histogram and
    a target histogram estimated from the noisy input.

    The noisy first-difference distribution is modeled as the clean one
    blurred by N(0, 2 sigma^2) with sigma the estimated noise level; the
    clean horizontal and vertical difference distributions are recovered
    by multiplicative deconvolution and combined (assuming independence)
    into the target magnitude histogram. With a near-zero noise estimate
    the target degenerates to the noisy image's own histogram.
    """
    require_same_shape(noisy, denoised)
    result_hist = _magnitude_histogram(denoised)

    sigma = estimate_noise_sigma(noisy)
    dx = noisy[:-1, 1:] - noisy[:-1, :-1]
    dy = noisy[1:, :-1] - noisy[:-1, :-1]
    fx = _deconvolve(_difference_histogram(dx), math.sqrt(2.0) * sigma)
    fy = _deconvolve(_difference_histogram(dy), math.sqrt(2.0) * sigma)
    joint = np.outer(fx, fy)
    target = np.bincount(
        _magnitude_bin_index().ravel(), weights=joint.ravel(), minlength=GH_BINS
    )
    total = target.sum()
    if total > 0:
        target /= total
    return float(np.sum(np.abs(target - result_hist)))


def _extract_single(noisy, denoised):
    return np.concatenate(
        [
            self_similarity(denoised),
            structural_residual(noisy, denoised),
            small_gradient_spread(denoised),
            structure_correlation(noisy, denoised),
            variational_energy(noisy, denoised),
            [gradient_histogram_distance(noisy, denoised)],
        ]
    )


def extract_features(noisy, denoised):
    """The 19-feature quality vector for a (noisy, denoised) pair.

    Color pairs are assessed per channel and averaged elementwise; the
    centered mean keeps equal channels bit-exact with the grayscale run.
    """
    require_same_shape(noisy, denoised)
    if min(noisy.shape[:2]) < PATCH_SIZE:
        raise ValueError(f"images must be at least {PATCH_SIZE}x{PATCH_SIZE}")
    if channel_count(noisy) == 1:
        return _extract_single(noisy, denoised)
    v0, v1, v2 = (
        _extract_single(cn, cd) for cn, cd in zip(channels(noisy), channels(denoised))
    )
    return v0 + ((v1 - v0) + (v2 - v0)) / 3.0
