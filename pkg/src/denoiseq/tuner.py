"""Gradient-ascent tuning of a denoiser parameter on predicted quality.

The ascent climbs q(theta) = predicted quality of denoise(noisy, theta)
using central finite differences. Each iteration costs exactly two
pipeline evaluations (the two probes); the q value recorded for an
iterate is the mean of its probes, and one final evaluation at the
accepted theta produces the returned image, so a run with k iterations
performs 2k + 1 evaluations in total.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .denoisers import THETA_BOUNDS, DenoiserId, denoise
from .features import extract_features
from .forest import predict
from .metrics import psnr, ssim

# ascent step sizes reported for a parameter range spanning ~80 units;
# scaled by range width when a method's bounds are narrower
BASE_STEP = {"psnr": 2.0, "ssim": 20.0}
BASE_RANGE_WIDTH = 80.0


@dataclass(frozen=True)
class TuneConfig:
    """Ascent settings; bounds are the method's declared theta range."""

    lo: float
    hi: float
    step: float = 2.0
    delta: float | None = None  # finite-difference half-step; default width/80
    max_iters: int = 20
    theta0: float | None = None  # default: midpoint of bounds

    def __post_init__(self):
        if self.lo >= self.hi:
            raise ValueError("invalid bounds")
        if self.step <= 0 or self.max_iters < 1:
            raise ValueError("step and max_iters must be positive")
        if self.delta is not None and self.delta <= 0:
            raise ValueError("delta must be positive")

    @property
    def resolved_delta(self):
        return self.delta if self.delta is not None else (self.hi - self.lo) / 80.0

    @property
    def tol(self):
        return 0.5 * self.resolved_delta

    @property
    def start(self):
        return self.theta0 if self.theta0 is not None else 0.5 * (self.lo + self.hi)

    @classmethod
    def for_method(cls, method, target, **overrides):
        """Defaults for a denoiser's theta range, with the step scaled to
        the range width."""
        lo, hi = THETA_BOUNDS[method]
        step = BASE_STEP[target] * (hi - lo) / BASE_RANGE_WIDTH
        kwargs = {"lo": lo, "hi": hi, "step": step}
        kwargs.update(overrides)
        return cls(**kwargs)


@dataclass
class TuneTrace:
    """Iterates of one ascent run plus the accepted final state."""

    thetas: list[float] = field(default_factory=list)
    qualities: list[float] = field(default_factory=list)
    gradients: list[float] = field(default_factory=list)
    theta_star: float = float("nan")
    final_quality: float = float("nan")
    converged: bool = False
    evaluations: int = 0
    method: str | None = None
    denoised: np.ndarray | None = field(default=None, repr=False)

    @property
    def iterations(self):
        return len(self.thetas)

    def to_csv(self, path):
        with open(path, "w", encoding="ascii") as fh:
            fh.write("iter,theta,q,grad\n")
            for i, (t, q, g) in enumerate(zip(self.thetas, self.qualities, self.gradients)):
                fh.write(f"{i},{t!r},{q!r},{g!r}\n")
            fh.write(f"final,{self.theta_star!r},{self.final_quality!r},\n")


def gradient_ascent(quality, cfg):
    """Climb a scalar quality function over [cfg.lo, cfg.hi].

    theta_{k+1} = clamp(theta_k + step * grad), with the gradient from
    central differences whose probe points are clamped into bounds.
    Stops when the theta update falls below half the difference step, or
    at max_iters (converged=False). The final quality(theta_star) call
    is included so evaluations == 2 * iterations + 1.
    """
    trace = TuneTrace()
    delta = cfg.resolved_delta
    theta = float(np.clip(cfg.start, cfg.lo, cfg.hi))
    for _ in range(cfg.max_iters):
        hi_point = min(theta + delta, cfg.hi)
        lo_point = max(theta - delta, cfg.lo)
        q_hi = quality(hi_point)
        q_lo = quality(lo_point)
        trace.evaluations += 2
        grad = (q_hi - q_lo) / (hi_point - lo_point)
        trace.thetas.append(theta)
        trace.qualities.append(0.5 * (q_hi + q_lo))
        trace.gradients.append(grad)
        nxt = float(np.clip(theta + cfg.step * grad, cfg.lo, cfg.hi))
        moved = abs(nxt - theta)
        theta = nxt
        if moved < cfg.tol:
            trace.converged = True
            break
    trace.theta_star = theta
    trace.final_quality = quality(theta)
    trace.evaluations += 1
    return trace


def quality_of(noisy, method, theta, model):
    """Predicted quality of denoising `noisy` with `method` at `theta`."""
    denoised = denoise(noisy, DenoiserId(method, theta=theta))
    return predict(model, extract_features(noisy, denoised))


def tune(noisy, method, model, cfg=None):
    """Tune a denoiser's theta for one noisy image; returns the trace
    with the final denoised image attached."""
    cfg = cfg or TuneConfig.for_method(method, model.target)
    last = {}

    def quality(theta):
        denoised = denoise(noisy, DenoiserId(method, theta=theta))
        last["img"] = denoised
        return predict(model, extract_features(noisy, denoised))

    trace = gradient_ascent(quality, cfg)
    trace.method = method
    trace.denoised = last["img"]
    return trace


def _true_metric(target):
    return psnr if target == "psnr" else ssim


def brute_force_optimum(noisy, clean, method, grid, target="psnr"):
    """Grid argmax of the true full-reference metric; ties take the
    smallest theta. This is the evaluation oracle, not part of tuning."""
    grid = sorted(float(t) for t in grid)
    if not grid:
        raise ValueError("empty grid")
    metric = _true_metric(target)
    scores = [metric(denoise(noisy, DenoiserId(method, theta=t)), clean) for t in grid]
    return grid[int(np.argmax(scores))]


def tune_quality_gap(trace, noisy, clean, theta_gt, target="psnr"):
    """True-metric gap between the brute-force optimum and the tuned
    result; nonnegative up to grid resolution."""
    metric = _true_metric(target)
    best = metric(denoise(noisy, DenoiserId(trace.method, theta=theta_gt)), clean)
    return best - metric(trace.denoised, clean)
