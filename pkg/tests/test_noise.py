import numpy as np
import pytest

from denoiseq.noise import (
    BENCHMARK_LEVELS,
    NoiseSpec,
    add_gaussian,
    add_poisson,
    add_salt_pepper,
    derive_seed,
    estimate_noise_sigma,
)


def test_gaussian_deterministic_and_in_range():
    img = np.full((64, 64), 128.0)
    a = add_gaussian(img, 30.0, 42)
    b = add_gaussian(img, 30.0, 42)
    assert np.array_equal(a, b)
    assert a.min() >= 0.0 and a.max() <= 255.0
    assert not np.array_equal(a, add_gaussian(img, 30.0, 43))


def test_gaussian_empirical_sigma():
    # mid-gray keeps the noise far from the clamp, >= 1e5 samples
    img = np.full((320, 320), 128.0)
    out = add_gaussian(img, 10.0, 7)
    measured = np.std(out - img)
    assert abs(measured - 10.0) / 10.0 < 0.02


def test_poisson_zero_rate_stays_zero():
    img = np.zeros((16, 16))
    assert not add_poisson(img, 0.05, 1).any()


def test_poisson_moments():
    img = np.full((400, 400), 100.0)
    out = add_poisson(img, 0.1, 11)
    # x -> k * Poisson(x / k): mean x, variance k * x
    assert abs(np.mean(out) - 100.0) / 100.0 < 0.05
    assert abs(np.var(out) - 10.0) / 10.0 < 0.05


def test_salt_pepper_rate_and_values():
    img = np.full((512, 512), 128.0)
    out = add_salt_pepper(img, 0.2, 3)
    corrupted = out != 128.0
    rate = corrupted.mean()
    assert abs(rate - 0.2) <= 0.005
    assert set(np.unique(out[corrupted])) <= {0.0, 255.0}
    # fair salt:pepper split, 4 sigma binomial bound
    n_salt = float((out == 255.0).sum())
    n_hit = float(corrupted.sum())
    assert abs(n_salt / n_hit - 0.5) <= 4 * np.sqrt(0.25 / n_hit)


def test_salt_pepper_hits_all_channels_together():
    img = np.full((64, 64, 3), 128.0)
    out = add_salt_pepper(img, 0.3, 9)
    hit = out[:, :, 0] != 128.0
    for c in (1, 2):
        assert np.array_equal(hit, out[:, :, c] != 128.0)
    assert np.array_equal(out[hit][:, 0], out[hit][:, 1])


def test_benchmark_levels_cover_paper_protocol():
    assert BENCHMARK_LEVELS["gaussian"] == (10.0, 20.0, 30.0)
    assert BENCHMARK_LEVELS["poisson"] == (0.05, 0.10, 0.15)
    assert BENCHMARK_LEVELS["salt_pepper"] == (0.1, 0.2, 0.3)


def test_spec_validation_and_key_roundtrip():
    spec = NoiseSpec("gaussian", 20.0, 77)
    assert NoiseSpec.parse(spec.key()) == spec
    with pytest.raises(ValueError):
        NoiseSpec("gaussian", -1.0, 0)
    with pytest.raises(ValueError):
        NoiseSpec("salt_pepper", 1.5, 0)
    with pytest.raises(ValueError):
        NoiseSpec("speckle", 1.0, 0)


def test_spec_apply_matches_direct_call():
    img = np.full((32, 32), 100.0)
    spec = NoiseSpec("poisson", 0.1, 5)
    assert np.array_equal(spec.apply(img), add_poisson(img, 0.1, 5))


def test_derive_seed_is_stable_and_sensitive():
    s = derive_seed(7, "img", "gaussian", 0)
    assert s == derive_seed(7, "img", "gaussian", 0)
    assert s != derive_seed(7, "img", "gaussian", 1)
    assert s != derive_seed(8, "img", "gaussian", 0)
    assert 0 <= s < 2**64


def test_sigma_estimator_constant_and_gaussian():
    assert estimate_noise_sigma(np.full((32, 32), 7.0)) == 0.0
    rng = np.random.default_rng(0)
    field = rng.normal(0.0, 10.0, size=(256, 256))
    est = estimate_noise_sigma(field)
    assert 9.0 <= est <= 11.0


def test_sigma_estimator_on_smooth_image_plus_noise():
    # smooth scene: the estimator should read the injected level
    y, x = np.mgrid[0:200, 0:200]
    clean = 100.0 + 50.0 * np.sin(x / 37.0) * np.cos(y / 29.0)
    noisy = add_gaussian(clean, 20.0, 123)
    est = estimate_noise_sigma(noisy)
    assert 17.0 <= est <= 23.0
