"""Command-line interface.

Subcommands: gen, features, train, predict, rank, tune, eval-rank,
eval-tune, plot. Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import __version__, bench
from .corpus import CORPUS_DIR, load_corpus
from .features import FEATURE_NAMES
from .forest import ForestConfig, load_model, predict, rank_results, save_model, train
from .image import load_image, save_image
from .tuner import TuneConfig, tune


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def build_parser():
    parser = _Parser(prog="denoiseq", description=__doc__)
    parser.add_argument("--version", action="version", version=f"denoiseq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, model=False, target=False):
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers")
        p.add_argument("--config", type=Path, help="key=value config file")
        if model:
            p.add_argument("--model", type=Path, required=True, help="model file")
        if target:
            p.add_argument("--target", choices=("psnr", "ssim"), default="psnr")

    p = sub.add_parser("gen", help="build the benchmark (noisy + denoised images, labels)")
    p.add_argument("--clean-dir", type=Path, help="directory of clean images")
    p.add_argument("--corpus", action="store_true", help="use the bundled clean corpus")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--limit", type=int, help="use only the first N clean images")
    common(p)

    p = sub.add_parser("features", help="extract the feature dataset from a manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="feature CSV path")
    common(p)

    p = sub.add_parser("train", help="train a quality model from a feature CSV")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="model file path")
    common(p, target=True)

    p = sub.add_parser("predict", help="predict quality of denoised results")
    p.add_argument("--noisy", type=Path, required=True)
    p.add_argument("images", type=Path, nargs="+")
    common(p, model=True)

    p = sub.add_parser("rank", help="rank denoised results, best first")
    p.add_argument("--noisy", type=Path, required=True)
    p.add_argument("images", type=Path, nargs="+")
    common(p, model=True)

    p = sub.add_parser("tune", help="gradient-ascent parameter tuning for one image")
    p.add_argument("--noisy", type=Path, required=True)
    p.add_argument("--method", required=True, choices=("gaussian_filter", "bilateral", "nlm"))
    p.add_argument("--step", type=float, help="ascent step size")
    p.add_argument("--delta", type=float, help="finite-difference half-step")
    p.add_argument("--max-iters", type=int, default=20)
    p.add_argument("--trace", type=Path, help="write the iterate trace CSV here")
    p.add_argument("--out", type=Path, help="write the tuned denoised image here")
    common(p, model=True)

    p = sub.add_parser("eval-rank", help="repeated-split ranking/regression study")
    p.add_argument("--features", type=Path, help="precomputed feature CSV")
    p.add_argument("--manifest", type=Path, help="manifest (features extracted on the fly)")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--train-fraction", type=float, default=0.05)
    p.add_argument("--out", type=Path, help="report text file")
    p.add_argument("--csv", type=Path, help="tau table CSV")
    common(p, target=True)

    p = sub.add_parser("eval-tune", help="tuner evaluation against the brute-force optimum")
    p.add_argument("--manifest", type=Path, help="manifest whose clean images to use")
    p.add_argument("--corpus", action="store_true", help="use the bundled clean corpus")
    p.add_argument("--method", default="nlm", choices=("gaussian_filter", "bilateral", "nlm"))
    p.add_argument("--images", type=int, default=50, help="number of noisy images")
    p.add_argument("--train-settings", type=int, default=12)
    p.add_argument("--out", type=Path, help="report text file")
    common(p, target=True)

    p = sub.add_parser("plot", help="emit SVG charts (and CSV tables)")
    kinds = p.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    ps = kinds.add_parser("scatter", help="feature value vs label scatter")
    ps.add_argument("--features", type=Path, required=True)
    ps.add_argument("--feature", required=True, choices=FEATURE_NAMES)
    ps.add_argument("--target", choices=("psnr", "ssim"), default="psnr")
    ps.add_argument("--out", type=Path, required=True)
    pt = kinds.add_parser("trace", help="tuning trajectory from a trace CSV")
    pt.add_argument("--trace", type=Path, required=True)
    pt.add_argument("--out", type=Path, required=True)
    pu = kinds.add_parser("tau", help="tau table bar chart from an eval-rank CSV")
    pu.add_argument("--csv", type=Path, required=True)
    pu.add_argument("--out", type=Path, required=True)
    return parser


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _forest_config(args):
    options = bench.read_config(args.config) if args.config else {}
    return bench.forest_config_from(options, seed=args.seed)


def _cmd_gen(args):
    if args.corpus == (args.clean_dir is not None):
        raise ValueError("pass exactly one of --clean-dir or --corpus")
    clean_dir = CORPUS_DIR if args.corpus else args.clean_dir
    rows = bench.build_benchmark(clean_dir, args.out, args.seed, jobs=args.jobs, limit=args.limit)
    noisy = len({r.noisy_path for r in rows})
    print(f"benchmark at {args.out}: {noisy} noisy images, {len(rows)} denoised rows")
    print(f"manifest: {args.out / 'manifest.csv'}")
    return 0


def _cmd_features(args):
    samples = bench.extract_dataset(args.manifest, jobs=args.jobs)
    bench.write_features_csv(samples, args.out)
    print(f"wrote {len(samples)} samples to {args.out}")
    return 0


def _cmd_train(args):
    samples = bench.read_features_csv(args.features)
    x = np.vstack([s.features for s in samples])
    y = np.array([s.label(args.target) for s in samples])
    model = train(x, y, _forest_config(args), args.target)
    save_model(model, args.out)
    print(f"trained {args.target} model on {len(samples)} samples, oob_rmse {model.oob_rmse:.4f}")
    print(f"model: {args.out}")
    return 0


def _cmd_predict(args):
    from .features import extract_features

    model = load_model(args.model)
    noisy = load_image(args.noisy)
    for path in args.images:
        value = predict(model, extract_features(noisy, load_image(path)))
        print(f"{path} {value:.6f}")
    return 0


def _cmd_rank(args):
    model = load_model(args.model)
    noisy = load_image(args.noisy)
    results = [(str(p), load_image(p)) for p in args.images]
    for rid, score in rank_results(model, noisy, results):
        print(f"{rid} {score:.6f}")
    return 0


def _cmd_tune(args):
    model = load_model(args.model)
    noisy = load_image(args.noisy)
    overrides = {"max_iters": args.max_iters}
    if args.step is not None:
        overrides["step"] = args.step
    if args.delta is not None:
        overrides["delta"] = args.delta
    cfg = TuneConfig.for_method(args.method, model.target, **overrides)
    trace = tune(noisy, args.method, model, cfg)
    if args.trace:
        trace.to_csv(args.trace)
    if args.out:
        save_image(trace.denoised, args.out)
    status = "converged" if trace.converged else "max-iters"
    print(
        f"theta_star {trace.theta_star:.6f} predicted_quality {trace.final_quality:.4f} "
        f"iterations {trace.iterations} evaluations {trace.evaluations} ({status})"
    )
    return 0


def _cmd_eval_rank(args):
    if (args.features is None) == (args.manifest is None):
        raise ValueError("pass exactly one of --features or --manifest")
    if args.features:
        samples = bench.read_features_csv(args.features)
    else:
        samples = bench.extract_dataset(args.manifest, jobs=args.jobs)
    split = bench.SplitSpec(args.train_fraction, args.reps, args.seed)
    report = bench.run_ranking_eval(samples, split, _forest_config(args), args.target)
    text = report.render()
    print(text, end="")
    if args.out:
        args.out.write_text(text)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["variant", "tau_mean", "tau_std", "rmse_mean", "rse_mean"])
            for name, stats in report.variants.items():
                writer.writerow(
                    [name, stats.mean_tau, stats.std_tau, stats.mean_rmse, stats.mean_rse]
                )
    return 0


def _cmd_eval_tune(args):
    if args.corpus == (args.manifest is not None):
        raise ValueError("pass exactly one of --manifest or --corpus")
    if args.corpus:
        clean_images = load_corpus()
    else:
        base = args.manifest.parent
        rows, _ = bench.read_manifest(args.manifest)
        ids = sorted({r.clean_id for r in rows})
        clean_images = [(cid, load_image(base / "clean" / f"{cid}.png")) for cid in ids]
    report = bench.run_tuning_eval(
        clean_images,
        method=args.method,
        target=args.target,
        seed=args.seed,
        n_images=args.images,
        train_settings=args.train_settings,
        jobs=args.jobs,
    )
    text = report.render()
    print(text, end="")
    if args.out:
        args.out.write_text(text)
    return 0


def _cmd_plot(args):
    plt = _pyplot()
    if args.kind == "scatter":
        samples = bench.read_features_csv(args.features)
        idx = FEATURE_NAMES.index(args.feature)
        xs = [s.features[idx] for s in samples]
        ys = [s.label(args.target) for s in samples]
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.scatter(xs, ys, s=6, alpha=0.4)
        ax.set_xlabel(args.feature)
        ax.set_ylabel(args.target.upper())
    elif args.kind == "trace":
        rows = list(csv.DictReader(open(args.trace)))
        iters = [r for r in rows if r["iter"] != "final"]
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot([int(r["iter"]) for r in iters], [float(r["theta"]) for r in iters], marker="o")
        ax.set_xlabel("iteration")
        ax.set_ylabel("theta")
    else:
        rows = list(csv.DictReader(open(args.csv)))
        fig, ax = plt.subplots(figsize=(6, 4))
        names = [r["variant"] for r in rows]
        taus = [float(r["tau_mean"]) for r in rows]
        errs = [float(r["tau_std"]) for r in rows]
        ax.bar(range(len(names)), taus, yerr=errs)
        ax.set_xticks(range(len(names)), names, rotation=60, fontsize=7)
        ax.set_ylabel("mean Kendall tau")
    fig.tight_layout()
    fig.savefig(args.out)
    print(f"wrote {args.out}")
    return 0


COMMANDS = {
    "gen": _cmd_gen,
    "features": _cmd_features,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "rank": _cmd_rank,
    "tune": _cmd_tune,
    "eval-rank": _cmd_eval_rank,
    "eval-tune": _cmd_eval_tune,
    "plot": _cmd_plot,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, RuntimeError) as exc:
        sys.stderr.write(f"denoiseq: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
