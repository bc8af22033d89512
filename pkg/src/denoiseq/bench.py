"""Benchmark construction and the ranking / tuning evaluation studies.

A benchmark directory is fully described by its manifest.csv: every row
ties one denoised result to its clean source, noise spec, and true
PSNR/SSIM labels. Generation is deterministic in the master seed and
resumable (files whose recorded checksums still match are not redone),
so two runs with the same seed produce byte-identical trees.

Layout written by build_benchmark:

    out/clean/<id>.png
    out/noisy/<id>__<kind><level-index>.png
    out/denoised/<id>__<kind><level-index>__<method><param-index>.png
    out/manifest.csv      # clean_id, noise_kind, noise_level, noise_seed,
                          # noisy_path, method, param, denoised_path, psnr, ssim
    out/checksums.txt     # sha256 per generated image
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
import multiprocessing
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .denoisers import GRIDS, THETA_BOUNDS, DenoiserId, denoise, grid_ids
from .features import FAMILIES, FEATURE_NAMES, extract_features
from .forest import ForestConfig, predict, train
from .image import load_image, save_image
from .metrics import kendall_tau, psnr, rmse_rse, ssim
from .noise import BENCHMARK_LEVELS, KINDS, NoiseSpec, derive_seed
from .tuner import TuneConfig, brute_force_optimum, tune, tune_quality_gap

log = logging.getLogger("denoiseq")

MANIFEST_MAGIC = "# denoiseq-manifest v1"
MANIFEST_COLUMNS = (
    "clean_id",
    "noise_kind",
    "noise_level",
    "noise_seed",
    "noisy_path",
    "method",
    "param",
    "denoised_path",
    "psnr",
    "ssim",
)


def _pmap(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with multiprocessing.Pool(jobs) as pool:
        return pool.map(fn, items, chunksize=1)


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def benchmark_specs(master_seed, clean_id):
    """The nine noise specs applied to one clean image."""
    specs = []
    for kind in KINDS:
        for level_index, level in enumerate(BENCHMARK_LEVELS[kind]):
            seed = derive_seed(master_seed, clean_id, kind, level_index)
            specs.append((level_index, NoiseSpec(kind, level, seed)))
    return specs


@dataclass
class ManifestRow:
    clean_id: str
    noise_kind: str
    noise_level: float
    noise_seed: int
    noisy_path: str
    method: str
    param: int
    denoised_path: str
    psnr: float
    ssim: float

    @property
    def noise_key(self):
        return f"{self.noise_kind}:{self.noise_level:g}:{self.noise_seed}"

    @property
    def result_id(self):
        return f"{self.method}:{self.param}"


def _generate_noisy_job(args):
    """Create one noisy image and its 17 denoised results; returns
    (rows, checksums) or an error marker."""
    out_dir, clean_id, level_index, spec, reuse = args
    out_dir = Path(out_dir)
    try:
        clean = load_image(out_dir / "clean" / f"{clean_id}.png")
        noisy_rel = f"noisy/{clean_id}__{spec.kind}{level_index}.png"
        noisy_path = out_dir / noisy_rel
        if noisy_rel not in reuse:
            save_image(spec.apply(clean), noisy_path)
        noisy = load_image(noisy_path)

        rows = []
        sums = {noisy_rel: _sha256(noisy_path)}
        for did in grid_ids():
            den_rel = (
                f"denoised/{clean_id}__{spec.kind}{level_index}__{did.method}{did.index}.png"
            )
            den_path = out_dir / den_rel
            if den_rel not in reuse:
                save_image(denoise(noisy, did), den_path)
            denoised = load_image(den_path)
            sums[den_rel] = _sha256(den_path)
            rows.append(
                ManifestRow(
                    clean_id=clean_id,
                    noise_kind=spec.kind,
                    noise_level=spec.level,
                    noise_seed=spec.seed,
                    noisy_path=noisy_rel,
                    method=did.method,
                    param=did.index,
                    denoised_path=den_rel,
                    psnr=psnr(denoised, clean),
                    ssim=ssim(denoised, clean),
                )
            )
        return rows, sums, None
    except Exception as exc:  # keep the batch going, report the failure
        return [], {}, f"{clean_id}/{spec.kind}{level_index}: {exc}"


def _load_previous_checksums(out_dir):
    path = Path(out_dir) / "checksums.txt"
    if not path.exists():
        return {}
    reuse = {}
    for line in path.read_text().splitlines():
        rel, _, digest = line.partition(" ")
        full = Path(out_dir) / rel
        if digest and full.exists() and _sha256(full) == digest:
            reuse[rel] = digest
    return reuse


def build_benchmark(clean_dir, out_dir, master_seed, jobs=1, limit=None):
    """Corrupt every clean image 9 ways, denoise each noisy image 17
    ways, label everything, and write the manifest. Returns the rows."""
    clean_dir = Path(clean_dir)
    out_dir = Path(out_dir)
    paths = sorted(
        p for ext in ("*.png", "*.pgm", "*.ppm") for p in clean_dir.glob(ext)
    )
    if limit is not None:
        paths = paths[:limit]
    if len(paths) < 2:
        raise ValueError(f"need at least two clean images in {clean_dir}")

    for sub in ("clean", "noisy", "denoised"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    for p in paths:
        target = out_dir / "clean" / f"{p.stem}.png"
        if not target.exists():
            save_image(load_image(p), target)

    reuse = _load_previous_checksums(out_dir)
    jobs_list = [
        (str(out_dir), p.stem, level_index, spec, reuse)
        for p in paths
        for level_index, spec in benchmark_specs(master_seed, p.stem)
    ]
    results = _pmap(_generate_noisy_job, jobs_list, jobs)

    rows = []
    checksums = {}
    for job_rows, sums, error in results:
        if error:
            log.error("benchmark row failed: %s", error)
            continue
        rows.extend(job_rows)
        checksums.update(sums)
    for p in paths:
        rel = f"clean/{p.stem}.png"
        checksums[rel] = _sha256(out_dir / rel)

    write_manifest(rows, out_dir / "manifest.csv", master_seed)
    with open(out_dir / "checksums.txt", "w", encoding="ascii") as fh:
        for rel in sorted(checksums):
            fh.write(f"{rel} {checksums[rel]}\n")
    return rows


def write_manifest(rows, path, master_seed):
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(f"{MANIFEST_MAGIC}\n# seed {master_seed}\n# version {__version__}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    r.clean_id,
                    r.noise_kind,
                    repr(r.noise_level),
                    r.noise_seed,
                    r.noisy_path,
                    r.method,
                    r.param,
                    r.denoised_path,
                    repr(r.psnr),
                    repr(r.ssim),
                ]
            )


def read_manifest(path):
    """Returns (rows, master_seed)."""
    text = Path(path).read_text(encoding="ascii")
    lines = text.splitlines()
    if not lines or lines[0] != MANIFEST_MAGIC:
        raise ValueError(f"not a manifest file: {path}")
    seed = int(lines[1].removeprefix("# seed "))
    body = [ln for ln in lines if not ln.startswith("#")]
    reader = csv.DictReader(io.StringIO("\n".join(body)))
    rows = [
        ManifestRow(
            clean_id=rec["clean_id"],
            noise_kind=rec["noise_kind"],
            noise_level=float(rec["noise_level"]),
            noise_seed=int(rec["noise_seed"]),
            noisy_path=rec["noisy_path"],
            method=rec["method"],
            param=int(rec["param"]),
            denoised_path=rec["denoised_path"],
            psnr=float(rec["psnr"]),
            ssim=float(rec["ssim"]),
        )
        for rec in reader
    ]
    return rows, seed


# ---------------------------------------------------------------------------
# feature dataset


@dataclass
class LabeledSample:
    clean_id: str
    noise_key: str
    result_id: str
    features: np.ndarray
    psnr: float
    ssim: float

    def label(self, target):
        return self.psnr if target == "psnr" else self.ssim


def _extract_group_job(args):
    base, noisy_rel, group = args
    base = Path(base)
    try:
        noisy = load_image(base / noisy_rel)
    except Exception as exc:
        log.error("skipping noisy image %s: %s", noisy_rel, exc)
        return []
    out = []
    for row in group:
        try:
            denoised = load_image(base / row.denoised_path)
            vec = extract_features(noisy, denoised)
        except Exception as exc:
            log.error("skipping row %s: %s", row.denoised_path, exc)
            continue
        out.append(
            LabeledSample(row.clean_id, row.noise_key, row.result_id, vec, row.psnr, row.ssim)
        )
    return out


def extract_dataset(manifest_path, jobs=1):
    """One labeled feature vector per manifest row (failures skipped)."""
    rows, _ = read_manifest(manifest_path)
    base = Path(manifest_path).parent
    groups = {}
    for row in rows:
        groups.setdefault(row.noisy_path, []).append(row)
    items = [(str(base), rel, group) for rel, group in sorted(groups.items())]
    samples = []
    for chunk in _pmap(_extract_group_job, items, jobs):
        samples.extend(chunk)
    return samples


def write_features_csv(samples, path):
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["clean_id", "noise_key", "result_id", *FEATURE_NAMES, "psnr", "ssim"]
        )
        for s in samples:
            writer.writerow(
                [s.clean_id, s.noise_key, s.result_id]
                + [repr(float(v)) for v in s.features]
                + [repr(s.psnr), repr(s.ssim)]
            )


def read_features_csv(path):
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.DictReader(fh)
        samples = []
        for rec in reader:
            vec = np.array([float(rec[name]) for name in FEATURE_NAMES])
            samples.append(
                LabeledSample(
                    rec["clean_id"],
                    rec["noise_key"],
                    rec["result_id"],
                    vec,
                    float(rec["psnr"]),
                    float(rec["ssim"]),
                )
            )
    return samples


# ---------------------------------------------------------------------------
# ranking / regression evaluation


@dataclass(frozen=True)
class SplitSpec:
    """Train/test partition BY CLEAN IMAGE (no clean image appears on
    both sides), repeated with fresh shuffles."""

    train_fraction: float = 0.05
    repetitions: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train fraction must be in (0, 1)")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")


def split_by_clean_image(clean_ids, spec, repetition):
    ids = sorted(set(clean_ids))
    if len(ids) < 2:
        raise ValueError("need at least two clean images to split")
    ss = np.random.SeedSequence(spec.seed).spawn(spec.repetitions)[repetition]
    rng = np.random.Generator(np.random.Philox(ss))
    order = [ids[i] for i in rng.permutation(len(ids))]
    n_train = min(max(1, round(spec.train_fraction * len(ids))), len(ids) - 1)
    return set(order[:n_train]), set(order[n_train:])


def feature_variants(families=True, leave_one_out=True):
    """Column subsets: the full vector, each family alone, and each
    family left out."""
    variants = {"all": list(range(len(FEATURE_NAMES)))}
    if families:
        for name, sl in FAMILIES.items():
            variants[f"only_{name}"] = list(range(*sl.indices(len(FEATURE_NAMES))))
    if leave_one_out:
        for name, sl in FAMILIES.items():
            drop = set(range(*sl.indices(len(FEATURE_NAMES))))
            variants[f"drop_{name}"] = [i for i in range(len(FEATURE_NAMES)) if i not in drop]
    return variants


def mean_ranking_tau(samples, predictions, target):
    """Kendall tau per noisy image (>= 2 results), averaged.

    Ground-truth and predicted orderings both break ties by result id.
    """
    groups = {}
    for sample, pred in zip(samples, predictions):
        groups.setdefault((sample.clean_id, sample.noise_key), []).append(
            (sample.result_id, sample.label(target), float(pred))
        )
    taus = []
    for entries in groups.values():
        if len(entries) < 2:
            continue
        truth = [rid for rid, _, _ in sorted(entries, key=lambda e: (-e[1], e[0]))]
        predicted = [rid for rid, _, _ in sorted(entries, key=lambda e: (-e[2], e[0]))]
        taus.append(kendall_tau(predicted, truth))
    if not taus:
        raise ValueError("no noisy image with at least two results")
    return float(np.mean(taus))


@dataclass
class VariantStats:
    taus: list[float]
    rmses: list[float]
    rses: list[float]

    @property
    def mean_tau(self):
        return float(np.mean(self.taus))

    @property
    def std_tau(self):
        return float(np.std(self.taus))

    @property
    def mean_rmse(self):
        return float(np.mean(self.rmses))

    @property
    def mean_rse(self):
        return float(np.mean(self.rses))


@dataclass
class RankingReport:
    target: str
    split: SplitSpec
    config: ForestConfig
    variants: dict[str, VariantStats]

    def render(self):
        out = [
            "denoiseq ranking evaluation",
            f"target {self.target}",
            f"split train_fraction={self.split.train_fraction} repetitions={self.split.repetitions} seed={self.split.seed}",
            f"forest n_trees={self.config.n_trees} max_depth={self.config.max_depth} "
            f"min_leaf={self.config.min_leaf} features_per_split={self.config.features_per_split} "
            f"seed={self.config.seed}",
            "",
            f"{'variant':<12s} {'tau_mean':>9s} {'tau_std':>8s} {'rmse':>9s} {'rse':>8s}",
        ]
        for name, stats in self.variants.items():
            out.append(
                f"{name:<12s} {stats.mean_tau:9.4f} {stats.std_tau:8.4f} "
                f"{stats.mean_rmse:9.4f} {stats.mean_rse:8.4f}"
            )
        out.append("")
        for name, stats in self.variants.items():
            rep_taus = " ".join(f"{t:.4f}" for t in stats.taus)
            out.append(f"per-rep tau {name}: {rep_taus}")
        return "\n".join(out) + "\n"


def run_ranking_eval(
    samples,
    split=None,
    config=None,
    target="psnr",
    families=True,
    leave_one_out=True,
):
    """Repeated-split ranking and regression study.

    Per repetition and feature variant: train on the train-side samples,
    predict the test side, record the per-noisy-image mean Kendall tau
    and the RMSE/RSE of the predictions.
    """
    split = split or SplitSpec()
    config = config or ForestConfig()
    samples = list(samples)
    x_all = np.vstack([s.features for s in samples])
    variants = feature_variants(families, leave_one_out)
    stats = {name: VariantStats([], [], []) for name in variants}

    clean_ids = [s.clean_id for s in samples]
    for rep in range(split.repetitions):
        train_ids, _ = split_by_clean_image(clean_ids, split, rep)
        in_train = np.array([s.clean_id in train_ids for s in samples])
        train_samples = [s for s, flag in zip(samples, in_train) if flag]
        test_samples = [s for s, flag in zip(samples, in_train) if not flag]
        y_train = np.array([s.label(target) for s in train_samples])
        y_test = np.array([s.label(target) for s in test_samples])
        rep_seed = derive_seed(config.seed, "rep", rep) % 2**63

        for name, cols in variants.items():
            x_train = x_all[in_train][:, cols]
            x_test = x_all[~in_train][:, cols]
            cfg = ForestConfig(
                n_trees=config.n_trees,
                max_depth=config.max_depth,
                min_leaf=config.min_leaf,
                features_per_split=min(config.features_per_split, len(cols)),
                bootstrap_fraction=config.bootstrap_fraction,
                seed=rep_seed,
            )
            model = train(
                x_train, y_train, cfg, target, tuple(FEATURE_NAMES[i] for i in cols)
            )
            preds = predict(model, x_test)
            rmse, rse = rmse_rse(preds, y_test)
            stats[name].taus.append(mean_ranking_tau(test_samples, preds, target))
            stats[name].rmses.append(rmse)
            stats[name].rses.append(rse)

    return RankingReport(target, split, config, stats)


# ---------------------------------------------------------------------------
# tuning evaluation


@dataclass
class TuningReport:
    method: str
    target: str
    gaps: list[float]
    iterations: list[int]
    evaluations: list[int]
    thetas: list[float]
    thetas_gt: list[float]

    @property
    def mean_gap(self):
        return float(np.mean(self.gaps))

    @property
    def std_gap(self):
        return float(np.std(self.gaps))

    @property
    def mean_iterations(self):
        return float(np.mean(self.iterations))

    def render(self):
        name = "Diff_PSNR" if self.target == "psnr" else "Diff_SSIM"
        out = [
            "denoiseq tuning evaluation",
            f"method {self.method}  target {self.target}  images {len(self.gaps)}",
            f"{name} mean {self.mean_gap:.4f} std {self.std_gap:.4f}",
            f"iterations mean {self.mean_iterations:.2f} std {float(np.std(self.iterations)):.2f}",
            "",
            "per-image: theta_star theta_gt gap iterations evaluations",
        ]
        for t, tg, g, it, ev in zip(
            self.thetas, self.thetas_gt, self.gaps, self.iterations, self.evaluations
        ):
            out.append(f"{t:.4f} {tg:.4f} {g:.4f} {it} {ev}")
        return "\n".join(out) + "\n"


def _tuning_noisy_set(clean_images, n_images, seed):
    """Round-robin noise specs over the clean images."""
    all_specs = [
        (kind, level_index)
        for kind in KINDS
        for level_index in range(len(BENCHMARK_LEVELS[kind]))
    ]
    noisy_set = []
    for i in range(n_images):
        cid, img = clean_images[i % len(clean_images)]
        kind, level_index = all_specs[i % len(all_specs)]
        spec = NoiseSpec(
            kind,
            BENCHMARK_LEVELS[kind][level_index],
            derive_seed(seed, "tune", cid, i, kind, level_index),
        )
        noisy_set.append((f"{cid}#{i}", img, spec.apply(img)))
    return noisy_set


def run_tuning_eval(
    clean_images,
    method="nlm",
    target="psnr",
    seed=0,
    n_images=50,
    train_settings=12,
    oracle_points=80,
    tune_config=None,
    forest_config=None,
    jobs=1,
):
    """Train a dedicated per-method model on half the noisy images and
    tune the other half; the score is the true-metric gap to the
    brute-force optimum over a dense theta grid."""
    if method not in THETA_BOUNDS:
        raise ValueError(f"{method} has no continuous tuning parameter")
    lo, hi = THETA_BOUNDS[method]
    noisy_set = _tuning_noisy_set(list(clean_images), n_images, seed)

    rng = np.random.Generator(np.random.Philox(key=derive_seed(seed, "tune-split")))
    order = rng.permutation(len(noisy_set))
    half = len(noisy_set) // 2
    train_items = [noisy_set[i] for i in order[:half]]
    test_items = [noisy_set[i] for i in order[half:]]

    metric = psnr if target == "psnr" else ssim
    train_grid = np.linspace(lo, hi, train_settings)
    feats, labels = [], []
    for _, clean, noisy in train_items:
        for theta in train_grid:
            denoised = denoise(noisy, DenoiserId(method, theta=float(theta)))
            feats.append(extract_features(noisy, denoised))
            labels.append(metric(denoised, clean))
    cfg = forest_config or ForestConfig(seed=derive_seed(seed, "tune-forest") % 2**63)
    model = train(np.vstack(feats), np.array(labels), cfg, target)

    tune_cfg = tune_config or TuneConfig.for_method(method, target)
    oracle_grid = np.linspace(lo, hi, oracle_points)
    report = TuningReport(method, target, [], [], [], [], [])
    for _, clean, noisy in test_items:
        trace = tune(noisy, method, model, tune_cfg)
        theta_gt = brute_force_optimum(noisy, clean, method, oracle_grid, target)
        gap = tune_quality_gap(trace, noisy, clean, theta_gt, target)
        report.gaps.append(gap)
        report.iterations.append(trace.iterations)
        report.evaluations.append(trace.evaluations)
        report.thetas.append(trace.theta_star)
        report.thetas_gt.append(theta_gt)
    return report


# ---------------------------------------------------------------------------
# config files


def read_config(path):
    """key = value lines; '#' starts a comment. Values stay strings."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def forest_config_from(options, seed=None):
    cfg = ForestConfig(
        n_trees=int(options.get("n_trees", 100)),
        max_depth=int(options.get("max_depth", 12)),
        min_leaf=int(options.get("min_leaf", 5)),
        features_per_split=int(options.get("features_per_split", 7)),
        bootstrap_fraction=float(options.get("bootstrap_fraction", 1.0)),
        seed=int(options.get("seed", 0)) if seed is None else seed,
    )
    return cfg
