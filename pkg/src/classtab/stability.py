"""Class stability: the integral of the boundary distance over the domain."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from ._parallel import child_rng, n_workers
from ._special import lgamma
from .distance import BOUNDARY_MODES, MODES, boundary_distances
from .domains import Box, check_p, lp_norm
from .fields import extend

__all__ = [
    "StabilityEstimate",
    "class_stability",
    "cube_stability_closed_form",
    "ball_stability_closed_form",
    "volume_matched_ratio",
    "matched_radius",
    "accuracy_measure",
    "default_samples",
    "stability_samples",
]

BLOCK = 1 << 16
_STREAM_MC = 3


@dataclass(frozen=True)
class StabilityEstimate:
    value: float
    std_error: float
    samples: int
    mode: str
    boundary_mode: str
    integrator: str
    p: float = 2.0
    error_bound: float = 0.0

    def __post_init__(self):
        if not self.value >= 0 or not self.std_error >= 0 or self.samples < 1:
            raise ValueError("invalid stability estimate")

    def to_dict(self):
        d = asdict(self)
        if d["p"] == math.inf:
            d["p"] = "inf"
        return d


def default_samples(dim, mode="pointwise"):
    if mode == "measure":
        return 1024
    return 10 ** 6 if dim <= 3 else 10 ** 5


def _mc_values(fbar, domain, p, mode, boundary_mode, samples, seed, measure_kw):
    n_blocks = -(-samples // BLOCK)

    def run(b):
        m = min(BLOCK, samples - b * BLOCK)
        X = domain.sample(child_rng(seed, _STREAM_MC, b), m)
        if not fbar.contains(X).all():
            raise ValueError("integration domain must lie inside the field's domain")
        vals, eb, _ = boundary_distances(fbar, X, p, mode, boundary_mode, seed=seed,
                                         first_index=b * BLOCK, **measure_kw)
        return vals, eb

    workers = min(n_workers(), n_blocks)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, range(n_blocks)))
    else:
        parts = [run(b) for b in range(n_blocks)]
    return np.concatenate([v for v, _ in parts]), np.concatenate([e for _, e in parts])


def stability_samples(field, domain=None, p=2.0, mode="pointwise", boundary_mode="extension",
                      samples=None, seed=0, **measure_kw):
    """Per-sample h values behind the Monte Carlo estimate, with the domain volume.

    Two fields integrated with the same seed and sample count see the same
    points, so their values can be paired.
    """
    p = check_p(p)
    fbar = extend(field)
    domain = fbar.domain if domain is None else domain
    samples = int(default_samples(domain.dim, mode) if samples is None else samples)
    vals, _ = _mc_values(fbar, domain, p, mode, boundary_mode, samples, seed, measure_kw)
    return vals, domain.volume()


def class_stability(field, domain=None, p=2.0, mode="pointwise", boundary_mode="extension",
                    integrator="monte_carlo", samples=None, seed=0, **measure_kw) -> StabilityEstimate:
    """S(f-bar) = integral over the domain of h(x) dmu.

    ``monte_carlo`` draws uniform samples in fixed blocks of 2**16, block b
    from the stream (seed, b), so the estimate does not depend on the
    worker count. ``grid`` is midpoint quadrature on a box with
    ``round(samples ** (1/d))`` cells per axis; in pointwise mode h is
    1-Lipschitz, which gives the reported per-cell error bound.
    """
    if mode not in MODES or boundary_mode not in BOUNDARY_MODES:
        raise ValueError("unknown mode")
    p = check_p(p)
    fbar = extend(field)
    if mode == "measure" and not fbar.base.supports_measure:
        raise ValueError("measure-theoretic stability is undefined on point clouds")
    domain = fbar.domain if domain is None else domain
    vol = domain.volume()
    if samples is None:
        samples = default_samples(domain.dim, mode)
    samples = int(samples)
    if integrator == "monte_carlo":
        if samples < 100:
            raise ValueError("monte_carlo needs at least 100 samples")
        vals, eb = _mc_values(fbar, domain, p, mode, boundary_mode, samples, seed, measure_kw)
        mean = float(np.mean(vals))
        if not math.isfinite(mean):
            return StabilityEstimate(math.inf, math.inf, samples, mode, boundary_mode, integrator, p)
        se = vol * float(np.std(vals, ddof=1)) / math.sqrt(samples)
        return StabilityEstimate(vol * mean, se, samples, mode, boundary_mode, integrator, p,
                                 error_bound=vol * float(np.mean(eb)))
    if integrator != "grid":
        raise ValueError("integrator must be 'monte_carlo' or 'grid'")
    if not isinstance(domain, Box):
        raise ValueError("grid integrator needs a Box domain")
    d = domain.dim
    if d > 4:
        raise ValueError("grid integrator is limited to d <= 4")
    m = max(1, int(round(samples ** (1.0 / d))))
    w = (domain.hi - domain.lo) / m
    axes = [domain.lo[a] + (np.arange(m) + 0.5) * w[a] for a in range(d)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    if not fbar.contains(X).all():
        raise ValueError("integration domain must lie inside the field's domain")
    vals, eb, _ = boundary_distances(fbar, X, p, mode, boundary_mode, seed=seed, **measure_kw)
    mean = float(np.mean(vals))
    if not math.isfinite(mean):
        return StabilityEstimate(math.inf, 0.0, X.shape[0], mode, boundary_mode, integrator, p, math.inf)
    cell = float(lp_norm(w / 2.0, p)) if mode == "pointwise" else 0.0
    bound = vol * (cell + float(np.mean(eb)))
    return StabilityEstimate(vol * mean, 0.0, X.shape[0], mode, boundary_mode, integrator, p, bound)


def cube_stability_closed_form(n, a):
    """2^n a^(n+1) / (n+1): stability of the constant field on [-a, a]^n (any p)."""
    n = int(n)
    if n < 1 or not a > 0:
        raise ValueError("need n >= 1 and a > 0")
    return 2.0 ** n * float(a) ** (n + 1) / (n + 1)


def ball_stability_closed_form(n, R):
    """2 pi^(n/2) / Gamma(n/2) * R^(n+1) / (n (n+1)) for the constant field on the l2 ball, p = 2."""
    n = int(n)
    if n < 1 or not R > 0:
        raise ValueError("need n >= 1 and R > 0")
    log_surface = math.log(2.0) + 0.5 * n * math.log(math.pi) - lgamma(0.5 * n)
    return math.exp(log_surface + (n + 1) * math.log(R) - math.log(n * (n + 1)))


def volume_matched_ratio(n):
    """Ball-to-cube stability ratio at equal volume: 2 Gamma(n/2 + 1)^(1/n) / sqrt(pi)."""
    n = int(n)
    if n < 1:
        raise ValueError("need n >= 1")
    return 2.0 * math.exp(lgamma(0.5 * n + 1.0) / n) / math.sqrt(math.pi)


def matched_radius(n, a=1.0):
    """Radius of the l2 ball with the volume of [-a, a]^n."""
    n = int(n)
    return 2.0 * a * math.exp((lgamma(0.5 * n + 1.0) - 0.5 * n * math.log(math.pi)) / n)


def accuracy_measure(candidate, reference, region=None, samples=10 ** 5, seed=0):
    """Lebesgue measure of {x in region : candidate(x) == reference(x)}, by Monte Carlo.

    ``candidate`` is anything callable on an (n, d) array returning labels
    (a field, an extended field, or a network's label predictor).
    """
    ref = extend(reference)
    region = ref.domain if region is None else region
    rng = child_rng(seed, _STREAM_MC + 1)
    X = region.sample(rng, int(samples))
    if not ref.contains(X).all():
        raise ValueError("region must lie inside the reference domain")
    cand = candidate.evaluate if hasattr(candidate, "evaluate") else candidate
    agree = np.asarray(cand(X)) == ref.evaluate(X)
    return region.volume() * float(np.mean(agree))
