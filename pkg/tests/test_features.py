import numpy as np
import pytest

from denoiseq.denoisers import gaussian_filter
from denoiseq.features import (
    FAMILIES,
    FEATURE_NAMES,
    SC_WINDOWS,
    SGM_PERCENTS,
    SS_ALPHAS,
    VR_PRESETS,
    _deconvolve,
    _pearson,
    extract_features,
    gradient_histogram_distance,
    self_similarity,
    small_gradient_spread,
    structural_residual,
    structure_correlation,
    variational_energy,
)
from denoiseq.image import gradient_field
from denoiseq.metrics import ssim_map
from denoiseq.noise import add_gaussian


def random_pair(seed, shape=(45, 45), sigma=15.0):
    rng = np.random.default_rng(seed)
    base = np.clip(rng.uniform(20, 235, shape) * 0.5 + 64, 0, 255)
    noisy = add_gaussian(base, sigma, seed)
    return noisy, gaussian_filter(noisy, 1.2)


# --- self-similarity ------------------------------------------------------


def test_ss_constant_image_rank_one():
    img = np.full((30, 30), 77.0)
    ss = self_similarity(img)
    # 4 patches, one nonzero singular value: t = 1 for every alpha
    assert np.allclose(ss, 1.0 / 4.0)


def test_ss_orthogonal_equal_norm_patches():
    # two orthogonal equal-norm patch vectors: equal singular values, so
    # even alpha=0.97 needs both -> SS = 1
    img = np.zeros((15, 30))
    img[::2, :15] = 50.0  # patch 1: even rows
    img[1::2, 15:] = 50.0  # patch 2: odd rows
    assert np.allclose(self_similarity(img), 1.0)


def test_ss_monotone_in_alpha_and_smoothing():
    noisy, _ = random_pair(0)
    smooth_weak = gaussian_filter(noisy, 0.5)
    smooth_strong = gaussian_filter(noisy, 3.0)
    for img in (noisy, smooth_weak, smooth_strong):
        ss = self_similarity(img)
        assert np.all(np.diff(ss) >= 0)
        assert np.all((ss > 0) & (ss <= 1))
    # smoothing increases patch redundancy, shrinking the needed rank
    assert self_similarity(smooth_strong)[0] < self_similarity(noisy)[0]


# --- structural residual ---------------------------------------------------


def test_sr_zero_iff_identical():
    noisy, denoised = random_pair(1)
    assert np.array_equal(structural_residual(noisy, noisy), np.zeros(3))
    assert np.all(structural_residual(noisy, denoised) > 0)


def test_sr_invariant_to_joint_constant_shift():
    # integer-valued images keep the arithmetic exact under a +10 shift
    rng = np.random.default_rng(2)
    noisy = rng.integers(0, 200, size=(40, 40)).astype(np.float64)
    denoised = np.clip(noisy + rng.integers(-5, 6, size=(40, 40)), 0, 245).astype(np.float64)
    a = structural_residual(noisy, denoised)
    b = structural_residual(noisy + 10.0, denoised + 10.0)
    assert np.array_equal(a, b)


def test_sr_structured_residual_dominates_iid():
    # residual = the clean image's edge layer vs i.i.d. noise of the same
    # variance; the widest guidance scale pools the i.i.d. residual away
    rng = np.random.default_rng(3)
    y, x = np.mgrid[0:48, 0:48]
    clean = np.where((x // 12 + y // 12) % 2 == 0, 80.0, 180.0)
    noisy = add_gaussian(clean, 10.0, 3)
    detail = clean - gaussian_filter(clean, 2.0)  # edge structure
    iid = rng.normal(0.0, 1.0, size=clean.shape)
    iid *= np.std(detail) / np.std(iid)
    sr_structured = structural_residual(noisy, noisy + detail)
    sr_iid = structural_residual(noisy, noisy + iid)
    assert sr_structured[2] > 3.0 * sr_iid[2]


# --- small gradient magnitudes ---------------------------------------------


def test_sgm_degenerate_cases():
    assert np.array_equal(small_gradient_spread(np.full((20, 20), 5.0)), np.zeros(3))
    ramp = np.tile(np.arange(20.0), (20, 1))
    # all non-zero gradient magnitudes equal 1 -> zero spread
    assert np.array_equal(small_gradient_spread(ramp), np.zeros(3))


def test_sgm_prefix_structure_and_direct_value():
    noisy, denoised = random_pair(4)
    mag = gradient_field(denoised).magnitude
    nz = np.sort(mag[mag > 0])
    expected = []
    for m in SGM_PERCENTS:
        take = int(nz.size * m / 100)
        subset = nz[:take]
        expected.append(np.std(subset))
        assert np.array_equal(subset, nz[: len(subset)])  # prefix of the sorted list
    assert np.allclose(small_gradient_spread(denoised), expected)


def test_sgm_decreases_with_stronger_smoothing():
    noisy, _ = random_pair(5, sigma=20.0)
    values = [small_gradient_spread(gaussian_filter(noisy, s))[1] for s in (0.5, 1.5, 3.0)]
    assert values[0] > values[1] > values[2]


# --- structure correlation ---------------------------------------------------


def test_sc_degenerate_identity_pair_is_zero():
    noisy, _ = random_pair(6)
    assert np.array_equal(structure_correlation(noisy, noisy), np.zeros(3))


def test_sc_matches_two_pass_pearson_oracle():
    noisy, denoised = random_pair(7, shape=(12, 12))
    shifted = np.clip((denoised - noisy) + 128.0, 0.0, 255.0)
    for i, k in enumerate(SC_WINDOWS):
        a = ssim_map(denoised, noisy, window="uniform", size=k).ravel()
        b = ssim_map(shifted, noisy, window="uniform", size=k).ravel()
        n = a.size
        sa = a.sum()
        sb = b.sum()
        cov = float((a * b).sum()) - sa * sb / n
        va = float((a * a).sum()) - sa * sa / n
        vb = float((b * b).sum()) - sb * sb / n
        expected = -cov / np.sqrt(va * vb)
        got = structure_correlation(noisy, denoised)[i]
        assert got == pytest.approx(expected, abs=1e-9)
        assert -1.0 <= got <= 1.0


# --- variational energy -------------------------------------------------------


def test_vr_zero_data_term():
    noisy, _ = random_pair(8)
    grad = gradient_field(noisy)
    n = noisy.size
    vr = variational_energy(noisy, noisy)
    smooth = {
        1: np.abs(grad.dx).sum() + np.abs(grad.dy).sum(),
        2: (grad.dx**2).sum() + (grad.dy**2).sum(),
    }
    for value, (_, ls, lam) in zip(vr, VR_PRESETS):
        assert value == pytest.approx(lam * smooth[ls] / n, rel=1e-12)


def test_vr_zero_smoothness_term():
    noisy, _ = random_pair(9)
    flat = np.full_like(noisy, 128.0)
    diff = noisy - flat
    n = noisy.size
    data = {1: np.abs(diff).sum(), 2: (diff**2).sum()}
    vr = variational_energy(noisy, flat)
    for value, (ld, _, _) in zip(vr, VR_PRESETS):
        assert value == pytest.approx(data[ld] / n, rel=1e-12)


def test_vr_lambda_monotonicity():
    noisy, denoised = random_pair(10)
    vr = variational_energy(noisy, denoised)
    assert vr[1] >= vr[0]  # same norms, lambda 1 vs 0.5
    assert vr[3] >= vr[2]
    assert vr[5] >= vr[4]


# --- gradient histogram --------------------------------------------------------


def test_gh_noiseless_input_nearly_self_consistent():
    # blocky image: noise estimate ~0, target degenerates to own histogram
    y, x = np.mgrid[0:60, 0:60]
    img = np.where((x // 15 + y // 15) % 2 == 0, 60.0, 190.0)
    assert gradient_histogram_distance(img, img) <= 0.05


def test_gh_bounded_and_sensitive():
    noisy, denoised = random_pair(11)
    gh_pair = gradient_histogram_distance(noisy, denoised)
    over = gaussian_filter(noisy, 4.0)
    gh_over = gradient_histogram_distance(noisy, over)
    for v in (gh_pair, gh_over):
        assert 0.0 <= v <= 2.0
    # over-smoothing moves the gradient histogram further from the target
    assert gh_over > gh_pair


def test_deconvolution_with_delta_kernel_is_identity():
    rng = np.random.default_rng(12)
    hist = rng.uniform(0, 1, 511)
    hist /= hist.sum()
    assert np.array_equal(_deconvolve(hist, 0.0), hist)


def test_deconvolution_recovers_mass():
    hist = np.zeros(511)
    hist[250:260] = 0.1
    out = _deconvolve(hist, 3.0)
    assert out.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(out >= 0)


def test_pearson_degenerate_is_none():
    assert _pearson(np.ones(9), np.arange(9.0)) is None


# --- full vector -----------------------------------------------------------


def test_vector_layout_and_identity_pattern():
    noisy, _ = random_pair(13)
    vec = extract_features(noisy, noisy)
    assert vec.shape == (19,)
    assert len(FEATURE_NAMES) == 19
    assert np.all(np.isfinite(vec))
    assert np.array_equal(vec[FAMILIES["sr"]], np.zeros(3))
    assert np.array_equal(vec[FAMILIES["sc"]], np.zeros(3))


def test_replicated_gray_equals_single_channel():
    noisy, denoised = random_pair(14)
    vec_gray = extract_features(noisy, denoised)
    vec_rgb = extract_features(np.dstack([noisy] * 3), np.dstack([denoised] * 3))
    assert np.array_equal(vec_gray, vec_rgb)


def test_family_ranges():
    for seed in range(3):
        noisy, denoised = random_pair(20 + seed)
        vec = extract_features(noisy, denoised)
        ss, sr = vec[FAMILIES["ss"]], vec[FAMILIES["sr"]]
        sgm, sc = vec[FAMILIES["sgm"]], vec[FAMILIES["sc"]]
        vr, gh = vec[FAMILIES["vr"]], vec[FAMILIES["gh"]]
        assert np.all((ss > 0) & (ss <= 1)) and np.all(np.diff(ss) >= 0)
        assert np.all(sr >= 0) and np.all(sgm >= 0) and np.all(vr >= 0)
        assert np.all((sc >= -1) & (sc <= 1))
        assert 0.0 <= gh[0] <= 2.0


def test_extraction_is_deterministic():
    noisy, denoised = random_pair(15)
    assert np.array_equal(extract_features(noisy, denoised), extract_features(noisy, denoised))


def test_too_small_image_rejected():
    with pytest.raises(ValueError):
        extract_features(np.zeros((10, 10)), np.zeros((10, 10)))
