import numpy as np
import pytest

from denoiseq.bench import (
    LabeledSample,
    SplitSpec,
    benchmark_specs,
    build_benchmark,
    extract_dataset,
    feature_variants,
    forest_config_from,
    mean_ranking_tau,
    read_config,
    read_features_csv,
    read_manifest,
    run_ranking_eval,
    run_tuning_eval,
    split_by_clean_image,
    write_features_csv,
)
from denoiseq.forest import ForestConfig
from denoiseq.image import load_image, save_image
from denoiseq.metrics import psnr, ssim


@pytest.fixture(scope="module")
def clean_dir(tmp_path_factory):
    """Three small synthetic clean images."""
    d = tmp_path_factory.mktemp("clean")
    rng = np.random.default_rng(0)
    y, x = np.mgrid[0:48, 0:48]
    save_image(np.where((x // 12 + y // 12) % 2 == 0, 70.0, 190.0), d / "blocks.png")
    save_image(128.0 + 90.0 * np.sin(x / 5.0) * np.cos(y / 7.0), d / "waves.png")
    smooth = 80.0 + 120.0 * np.exp(-((x - 24.0) ** 2 + (y - 30.0) ** 2) / 240.0)
    save_image(np.clip(smooth + rng.normal(0, 2, smooth.shape), 0, 255), d / "bump.png")
    return d


@pytest.fixture(scope="module")
def benchmark(clean_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    rows = build_benchmark(clean_dir, out, master_seed=7)
    return out, rows


def test_benchmark_row_arithmetic(benchmark):
    out, rows = benchmark
    assert len(rows) == 3 * 9 * 17
    assert len({r.noisy_path for r in rows}) == 27
    per_noisy = {}
    for r in rows:
        per_noisy.setdefault(r.noisy_path, []).append(r)
    assert all(len(g) == 17 for g in per_noisy.values())
    per_clean = {}
    for r in rows:
        per_clean.setdefault(r.clean_id, set()).add(r.noise_key)
    assert all(len(specs) == 9 for specs in per_clean.values())
    assert all(np.isfinite(r.psnr) and np.isfinite(r.ssim) for r in rows)


def test_benchmark_specs_are_deterministic():
    specs = benchmark_specs(7, "blocks")
    again = benchmark_specs(7, "blocks")
    assert specs == again
    other = benchmark_specs(8, "blocks")
    assert [s.seed for _, s in specs] != [s.seed for _, s in other]


def test_manifest_roundtrip_and_labels(benchmark):
    out, rows = benchmark
    parsed, seed = read_manifest(out / "manifest.csv")
    assert seed == 7
    assert len(parsed) == len(rows)
    assert parsed[0] == rows[0]
    # labels recompute exactly from the stored images
    for row in (parsed[0], parsed[100], parsed[-1]):
        clean = load_image(out / "clean" / f"{row.clean_id}.png")
        denoised = load_image(out / row.denoised_path)
        assert psnr(denoised, clean) == row.psnr
        assert ssim(denoised, clean) == row.ssim


def test_regeneration_is_byte_identical(clean_dir, benchmark, tmp_path):
    out, _ = benchmark
    again = tmp_path / "again"
    build_benchmark(clean_dir, again, master_seed=7)
    assert (again / "manifest.csv").read_bytes() == (out / "manifest.csv").read_bytes()
    assert (again / "checksums.txt").read_bytes() == (out / "checksums.txt").read_bytes()


def test_rerun_resumes_and_reproduces(clean_dir, benchmark):
    out, _ = benchmark
    before = (out / "manifest.csv").read_bytes()
    build_benchmark(clean_dir, out, master_seed=7)
    assert (out / "manifest.csv").read_bytes() == before


def test_dataset_extraction_and_csv_roundtrip(benchmark, tmp_path):
    out, rows = benchmark
    samples = extract_dataset(out / "manifest.csv")
    assert len(samples) == len(rows)
    assert all(s.features.shape == (19,) for s in samples)
    path = tmp_path / "features.csv"
    write_features_csv(samples, path)
    back = read_features_csv(path)
    assert len(back) == len(samples)
    for a, b in zip(samples, back):
        assert np.array_equal(a.features, b.features)
        assert (a.psnr, a.ssim, a.result_id) == (b.psnr, b.ssim, b.result_id)


def test_split_never_mixes_clean_images():
    ids = [f"img{i}" for i in range(10)] * 5
    spec = SplitSpec(train_fraction=0.3, repetitions=4, seed=1)
    seen = set()
    for rep in range(4):
        train, test = split_by_clean_image(ids, spec, rep)
        assert train.isdisjoint(test)
        assert train | test == set(ids)
        assert len(train) == 3
        seen.add(tuple(sorted(train)))
        again, _ = split_by_clean_image(ids, spec, rep)
        assert train == again
    assert len(seen) > 1  # repetitions reshuffle


def test_mean_ranking_tau_hand_case():
    def sample(cid, nkey, rid, label):
        return LabeledSample(cid, nkey, rid, np.zeros(19), label, label / 100.0)

    samples = [
        sample("a", "g", "r1", 30.0),
        sample("a", "g", "r2", 20.0),
        sample("a", "g", "r3", 10.0),
        sample("b", "g", "r1", 10.0),
        sample("b", "g", "r2", 20.0),
    ]
    # group a predicted in truth order -> tau 1; group b reversed -> -1
    preds = [3.0, 2.0, 1.0, 2.0, 1.0]
    assert mean_ranking_tau(samples, preds, "psnr") == pytest.approx(0.0)
    assert mean_ranking_tau(samples[:3], preds[:3], "psnr") == 1.0


def test_feature_variants_layout():
    variants = feature_variants()
    assert set(variants) == {
        "all",
        "only_ss",
        "only_sr",
        "only_sgm",
        "only_sc",
        "only_vr",
        "only_gh",
        "drop_ss",
        "drop_sr",
        "drop_sgm",
        "drop_sc",
        "drop_vr",
        "drop_gh",
    }
    assert variants["all"] == list(range(19))
    assert variants["only_vr"] == [12, 13, 14, 15, 16, 17]
    assert variants["drop_gh"] == list(range(18))


def synthetic_samples(n_clean=8, results=6, seed=0):
    rng = np.random.default_rng(seed)
    samples = []
    for c in range(n_clean):
        for n in range(2):
            quality = rng.uniform(15, 40, results)
            for r, q in enumerate(quality):
                vec = rng.normal(0, 0.3, 19)
                vec[0] = q / 40.0  # informative feature
                vec[5] = q / 40.0 + rng.normal(0, 0.05)
                samples.append(
                    LabeledSample(f"c{c}", f"noise{n}", f"r{r}", vec, q, q / 45.0)
                )
    return samples


def test_run_ranking_eval_smoke():
    samples = synthetic_samples()
    split = SplitSpec(train_fraction=0.5, repetitions=2, seed=3)
    cfg = ForestConfig(n_trees=15, seed=5)
    report = run_ranking_eval(samples, split, cfg, "psnr")
    assert set(report.variants) == set(feature_variants())
    stats = report.variants["all"]
    assert len(stats.taus) == 2
    assert all(-1.0 <= t <= 1.0 for t in stats.taus)
    assert stats.mean_tau > 0.5  # the synthetic target is learnable
    text = report.render()
    assert "tau_mean" in text and "only_gh" in text and "per-rep" in text
    # deterministic
    again = run_ranking_eval(samples, split, cfg, "psnr")
    assert again.variants["all"].taus == stats.taus


def test_run_tuning_eval_smoke(clean_dir):
    images = [(p.stem, load_image(p)) for p in sorted(clean_dir.glob("*.png"))]
    report = run_tuning_eval(
        images,
        method="gaussian_filter",
        target="psnr",
        seed=11,
        n_images=4,
        train_settings=5,
        oracle_points=12,
        forest_config=ForestConfig(n_trees=10, seed=2),
    )
    assert len(report.gaps) == 2
    assert all(ev == 2 * it + 1 for ev, it in zip(report.evaluations, report.iterations))
    lo, hi = 0.3, 5.0
    assert all(lo <= t <= hi for t in report.thetas)
    text = report.render()
    assert "Diff_PSNR" in text and "iterations mean" in text


def test_read_config_and_forest_config(tmp_path):
    cfg_file = tmp_path / "forest.cfg"
    cfg_file.write_text("n_trees = 11\nmax_depth=4  # comment\n\n# full-line comment\n")
    options = read_config(cfg_file)
    assert options == {"n_trees": "11", "max_depth": "4"}
    cfg = forest_config_from(options, seed=9)
    assert cfg.n_trees == 11 and cfg.max_depth == 4 and cfg.seed == 9
    bad = tmp_path / "bad.cfg"
    bad.write_text("just words\n")
    with pytest.raises(ValueError):
        read_config(bad)
