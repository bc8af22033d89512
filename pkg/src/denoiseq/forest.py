"""Random-forest regression mapping feature vectors to quality labels.

CART regression trees with variance-reduction splits, bagging, and
deterministic tie-breaking (lowest feature index, then lowest threshold)
so that training with a fixed seed reproduces the model byte-exactly.
Per-tree randomness comes from Philox streams spawned off the master
seed, so trees are independent of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .features import FEATURE_NAMES, extract_features

MODEL_MAGIC = "denoiseq-model v1"


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int = 12
    min_leaf: int = 5
    features_per_split: int = 7
    bootstrap_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.n_trees, self.max_depth, self.min_leaf, self.features_per_split) < 1:
            raise ValueError("forest config values must be positive")
        if not 0.0 < self.bootstrap_fraction <= 1.0:
            raise ValueError("bootstrap fraction must be in (0, 1]")


@dataclass
class Tree:
    feature: np.ndarray  # split feature, -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # leaf mean (unused on split nodes)


@dataclass
class QualityModel:
    target: str
    config: ForestConfig
    trees: list[Tree] = field(repr=False)
    label_range: tuple[float, float]
    feature_names: tuple[str, ...]
    oob_rmse: float
    importance: np.ndarray


@njit(cache=True)
def _grow_tree(x, y, subsets, max_depth, min_leaf, feature, threshold, left, right, value, gain):
    n = x.shape[0]
    cap = feature.shape[0]
    fps = subsets.shape[1]
    idx = np.arange(n)
    buf = np.empty(n, dtype=np.int64)
    vals = np.empty(n, dtype=np.float64)
    cy = np.empty(n, dtype=np.float64)

    stack_node = np.empty(cap, dtype=np.int64)
    stack_lo = np.empty(cap, dtype=np.int64)
    stack_hi = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    sp = 0
    stack_node[0], stack_lo[0], stack_hi[0], stack_depth[0] = 0, 0, n, 0
    sp = 1
    node_count = 1

    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        lo = stack_lo[sp]
        hi = stack_hi[sp]
        depth = stack_depth[sp]
        m = hi - lo

        total = 0.0
        for i in range(lo, hi):
            total += y[idx[i]]
        mean = total / m

        best_score = 0.0
        best_f = -1
        best_thr = 0.0
        s_c = 0.0
        if depth < max_depth and m >= 2 * min_leaf and node_count + 2 <= cap:
            for i in range(m):
                cy[i] = y[idx[lo + i]] - mean
                s_c += cy[i]
            base = s_c * s_c / m
            best_score = base
            for j in range(fps):
                f = subsets[node, j]
                for i in range(m):
                    vals[i] = x[idx[lo + i], f]
                order = np.argsort(vals[:m])
                sl = 0.0
                for i in range(m - 1):
                    o = order[i]
                    sl += cy[o]
                    nl = i + 1
                    if nl < min_leaf:
                        continue
                    nr = m - nl
                    if nr < min_leaf:
                        break
                    v = vals[o]
                    v_next = vals[order[i + 1]]
                    if v == v_next:
                        continue
                    sr = s_c - sl
                    score = sl * sl / nl + sr * sr / nr
                    # scores within a relative band count as ties and fall
                    # to the lowest feature/threshold, keeping the argmax
                    # stable under affine label maps
                    if score > best_score + 1e-10 * best_score:
                        best_score = score
                        best_f = f
                        thr = 0.5 * (v + v_next)
                        if not (v <= thr < v_next):
                            thr = v
                        best_thr = thr

        if best_f < 0:
            feature[node] = -1
            value[node] = mean
            continue

        nl = 0
        nr = 0
        for i in range(lo, hi):
            if x[idx[i], best_f] <= best_thr:
                idx[lo + nl] = idx[i]
                nl += 1
            else:
                buf[nr] = idx[i]
                nr += 1
        for i in range(nr):
            idx[lo + nl + i] = buf[i]

        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = node_count
        right[node] = node_count + 1
        value[node] = mean
        gain[node] = best_score - (s_c * s_c / m)

        stack_node[sp], stack_lo[sp], stack_hi[sp], stack_depth[sp] = (
            node_count + 1,
            lo + nl,
            hi,
            depth + 1,
        )
        sp += 1
        stack_node[sp], stack_lo[sp], stack_hi[sp], stack_depth[sp] = (
            node_count,
            lo,
            lo + nl,
            depth + 1,
        )
        sp += 1
        node_count += 2

    return node_count


@njit(cache=True)
def _predict_tree(xq, feature, threshold, left, right, value, out):
    for r in range(xq.shape[0]):
        node = 0
        while feature[node] >= 0:
            if xq[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] += value[node]


def _node_capacity(n, config):
    by_leaves = 2 * max(n // config.min_leaf, 1) + 1
    by_depth = 2 ** (config.max_depth + 1) - 1
    return min(by_leaves, by_depth)


def train(x, y, config=None, target="psnr", feature_names=FEATURE_NAMES):
    """Fit a bagged forest of CART regression trees.

    x is (n, d) feature rows, y the matching labels. Constant labels are
    allowed and produce single-leaf trees. Deterministic for a fixed
    config seed, including under any parallel evaluation order.
    """
    config = config or ForestConfig()
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("x must be (n, d) with matching label vector")
    n, d = x.shape
    if n < 2:
        raise ValueError("need at least two training samples")
    if d != len(feature_names):
        raise ValueError("feature_names must match the feature dimension")
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
        raise ValueError("features and labels must be finite")

    fps = min(config.features_per_split, d)
    nb = max(1, round(config.bootstrap_fraction * n))
    streams = np.random.SeedSequence(config.seed).spawn(config.n_trees)

    trees = []
    importance = np.zeros(d)
    oob_sum = np.zeros(n)
    oob_cnt = np.zeros(n, dtype=np.int64)
    scratch = np.empty(n)
    for stream in streams:
        rng = np.random.Generator(np.random.Philox(stream))
        boot = rng.integers(0, n, size=nb)
        cap = _node_capacity(nb, config)
        subsets = np.sort(np.argsort(rng.random((cap, d)), axis=1)[:, :fps], axis=1)
        feat = np.full(cap, -1, dtype=np.int64)
        thr = np.zeros(cap)
        left = np.zeros(cap, dtype=np.int64)
        right = np.zeros(cap, dtype=np.int64)
        value = np.zeros(cap)
        gain = np.zeros(cap)
        count = _grow_tree(
            x[boot],
            y[boot],
            subsets,
            config.max_depth,
            config.min_leaf,
            feat,
            thr,
            left,
            right,
            value,
            gain,
        )
        tree = Tree(
            feat[:count].copy(),
            thr[:count].copy(),
            left[:count].copy(),
            right[:count].copy(),
            value[:count].copy(),
        )
        trees.append(tree)
        split = tree.feature >= 0
        np.add.at(importance, tree.feature[split], gain[:count][split])

        out_of_bag = np.bincount(boot, minlength=n) == 0
        if out_of_bag.any():
            scratch[:] = 0.0
            _predict_tree(x, tree.feature, tree.threshold, tree.left, tree.right, tree.value, scratch)
            oob_sum[out_of_bag] += scratch[out_of_bag]
            oob_cnt[out_of_bag] += 1

    seen = oob_cnt > 0
    if seen.any():
        residual = oob_sum[seen] / oob_cnt[seen] - y[seen]
        oob_rmse = float(np.sqrt(np.mean(residual**2)))
    else:
        oob_rmse = float("nan")

    total_gain = importance.sum()
    importance = importance / total_gain if total_gain > 0 else np.full(d, 1.0 / d)

    return QualityModel(
        target=target,
        config=config,
        trees=trees,
        label_range=(float(y.min()), float(y.max())),
        feature_names=tuple(feature_names),
        oob_rmse=oob_rmse,
        importance=importance,
    )


def predict(model, features):
    """Mean leaf value over all trees; stays within the training range."""
    q = np.asarray(features, dtype=np.float64)
    single = q.ndim == 1
    q = np.ascontiguousarray(np.atleast_2d(q))
    if q.shape[1] != len(model.feature_names):
        raise ValueError(f"expected {len(model.feature_names)} features, got {q.shape[1]}")
    acc = np.zeros(q.shape[0])
    for tree in model.trees:
        _predict_tree(q, tree.feature, tree.threshold, tree.left, tree.right, tree.value, acc)
    acc /= len(model.trees)
    return float(acc[0]) if single else acc


def feature_importance(model):
    """Share of total variance reduction attributed to each feature."""
    return model.importance.copy()


def rank_results(model, noisy, results):
    """Order candidate denoising results of one noisy image, best first.

    `results` is a sequence of (id, denoised image); returns a list of
    (id, predicted quality) sorted by descending prediction, ties broken
    by id.
    """
    results = list(results)
    if not results:
        raise ValueError("no results to rank")
    scored = []
    for rid, img in results:
        pred = predict(model, extract_features(noisy, img))
        scored.append((rid, float(pred)))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored


def _fmt(x):
    return repr(float(x))


def save_model(model, path):
    """Write the versioned structured-text model file (see README)."""
    lines = [MODEL_MAGIC]
    cfg = model.config
    lines.append(f"target {model.target}")
    lines.append(f"n_trees {cfg.n_trees}")
    lines.append(f"max_depth {cfg.max_depth}")
    lines.append(f"min_leaf {cfg.min_leaf}")
    lines.append(f"features_per_split {cfg.features_per_split}")
    lines.append(f"bootstrap_fraction {_fmt(cfg.bootstrap_fraction)}")
    lines.append(f"seed {cfg.seed}")
    lines.append(f"label_range {_fmt(model.label_range[0])} {_fmt(model.label_range[1])}")
    lines.append(f"oob_rmse {_fmt(model.oob_rmse)}")
    lines.append("importance " + " ".join(_fmt(v) for v in model.importance))
    lines.append("features " + " ".join(model.feature_names))
    for i, tree in enumerate(model.trees):
        lines.append(f"tree {i} nodes {tree.feature.size}")
        for f, t, l, r, v in zip(tree.feature, tree.threshold, tree.left, tree.right, tree.value):
            lines.append(f"{f} {_fmt(t)} {l} {r} {_fmt(v)}")
    lines.append("end")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _expect(line, key):
    name, _, rest = line.partition(" ")
    if name != key:
        raise ValueError(f"malformed model file: expected {key!r}, got {name!r}")
    return rest


def load_model(path):
    """Read a model file written by save_model; bit-exact round trip."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MODEL_MAGIC:
        raise ValueError(f"unsupported model file (want {MODEL_MAGIC!r})")
    it = iter(lines[1:])
    target = _expect(next(it), "target")
    config = ForestConfig(
        n_trees=int(_expect(next(it), "n_trees")),
        max_depth=int(_expect(next(it), "max_depth")),
        min_leaf=int(_expect(next(it), "min_leaf")),
        features_per_split=int(_expect(next(it), "features_per_split")),
        bootstrap_fraction=float(_expect(next(it), "bootstrap_fraction")),
        seed=int(_expect(next(it), "seed")),
    )
    lo, hi = _expect(next(it), "label_range").split()
    oob_rmse = float(_expect(next(it), "oob_rmse"))
    importance = np.array([float(v) for v in _expect(next(it), "importance").split()])
    feature_names = tuple(_expect(next(it), "features").split())
    trees = []
    for i in range(config.n_trees):
        head = next(it).split()
        if head[:2] != ["tree", str(i)] or head[2] != "nodes":
            raise ValueError(f"malformed model file at tree {i}")
        count = int(head[3])
        feat = np.empty(count, dtype=np.int64)
        thr = np.empty(count)
        left = np.empty(count, dtype=np.int64)
        right = np.empty(count, dtype=np.int64)
        value = np.empty(count)
        for k in range(count):
            parts = next(it).split()
            feat[k] = int(parts[0])
            thr[k] = float(parts[1])
            left[k] = int(parts[2])
            right[k] = int(parts[3])
            value[k] = float(parts[4])
        trees.append(Tree(feat, thr, left, right, value))
    if next(it, None) != "end":
        raise ValueError("malformed model file: missing end marker")
    return QualityModel(
        target=target,
        config=config,
        trees=trees,
        label_range=(float(lo), float(hi)),
        feature_names=feature_names,
        oob_rmse=oob_rmse,
        importance=importance,
    )
