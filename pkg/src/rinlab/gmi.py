"""Achievable-rate estimation with Gaussian decoding metrics.

The receiver is assumed to decode with a (possibly mismatched) Gaussian
metric whose variance may depend on the hypothesized level.  The resulting
generalized mutual information decomposes as log2(M) plus one nonpositive
term per constellation level; both the total and the per-level terms are
estimated from channel samples by stratified Monte Carlo, so the
decomposition identity holds exactly on any finite sample set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constellation import Constellation, draw_symbols
from .rin_variance import VarianceModel
from .waveform import LinkConfig, NoiseSwitches, simulate_link

LN2 = np.log(2.0)

#: Fewer samples than this gives confidence intervals too wide to rank
#: metric variants, which is the only use these estimates have.
MIN_GMI_SAMPLES = 10_000

#: Metric exponents tried before local refinement.
DEFAULT_S_GRID = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0)

_CHUNK = 1 << 18


@dataclass(frozen=True)
class ChannelSamples:
    """Transmitted level indices, levels (watts), and received samples."""

    indices: np.ndarray
    levels: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if not (len(self.indices) == len(self.levels) == len(self.y)):
            raise ValueError("mismatched sample array lengths")

    def __len__(self) -> int:
        return len(self.y)


@dataclass(frozen=True)
class MetricSpec:
    """Gaussian decoding metric: per-level variance and exponent s.

    variance_model supplies the signal-dependent part of the metric
    variance; None means the metric assumes thermal noise only.
    """

    constellation: Constellation
    sigma_q_sq: float
    variance_model: VarianceModel | None = None
    s: float = 1.0
    level_variances: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.sigma_q_sq < 0:
            raise ValueError("sigma_q_sq must be nonnegative")
        if self.s <= 0:
            raise ValueError(f"metric exponent must be positive, got {self.s}")
        v = np.full(self.constellation.order, float(self.sigma_q_sq))
        if self.variance_model is not None:
            v = v + self.variance_model.evaluate(self.constellation.levels)
        if not np.all(v > 0):
            raise ValueError("metric variance must be positive at every level")
        object.__setattr__(self, "level_variances", v)

    def with_s(self, s: float) -> "MetricSpec":
        return MetricSpec(self.constellation, self.sigma_q_sq, self.variance_model, s)


def log_metric(y, level_index: int, spec: MetricSpec):
    """s * log q(y | level): scaled Gaussian log-density at one level."""
    v = spec.level_variances[level_index]
    a = spec.constellation.levels[level_index]
    y = np.asarray(y, dtype=float)
    return spec.s * (-0.5 * np.log(2 * np.pi * v) - (y - a) ** 2 / (2 * v))


@dataclass(frozen=True)
class GmiEstimate:
    """Stratified estimate of the rate and its per-level decomposition.

    gmi = log2(order) + beta.sum() holds exactly by construction; every
    beta term is nonpositive up to estimation noise.
    """

    gmi: float
    stderr: float
    beta: np.ndarray
    beta_stderr: np.ndarray
    n: int
    s: float

    @property
    def order(self) -> int:
        return len(self.beta)


def estimate_gmi(samples: ChannelSamples, spec: MetricSpec) -> GmiEstimate:
    """Estimate the achievable rate of the metric on the given samples.

    Works in the log domain throughout: for each sample the metric
    log-density of every hypothesis level is computed, normalized by a
    max-shifted logsumexp, and the correct-level log-posterior (always
    nonpositive) is averaged per transmitted level.
    """
    n = len(samples)
    if n < MIN_GMI_SAMPLES:
        raise ValueError(f"need at least {MIN_GMI_SAMPLES} samples, got {n}")
    const = spec.constellation
    m = const.order
    levels = const.levels
    v = spec.level_variances
    log_norm = -0.5 * np.log(2 * np.pi * v)

    counts = np.bincount(samples.indices, minlength=m)
    if counts.min() < 2:
        raise ValueError("every level needs at least two samples")

    sums = np.zeros(m)
    sq_sums = np.zeros(m)
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        y = samples.y[lo:hi, None]
        idx = samples.indices[lo:hi]
        ll = spec.s * (log_norm - (y - levels) ** 2 / (2 * v))
        peak = ll.max(axis=1)
        lse = peak + np.log(np.exp(ll - peak[:, None]).sum(axis=1))
        u = (ll[np.arange(hi - lo), idx] - lse) / LN2
        sums += np.bincount(idx, weights=u, minlength=m)
        sq_sums += np.bincount(idx, weights=u * u, minlength=m)

    cond_mean = sums / counts
    cond_var = (sq_sums / counts - cond_mean**2) * counts / (counts - 1)
    beta = cond_mean / m
    beta_stderr = np.sqrt(cond_var / counts) / m
    gmi = float(np.log2(m) + beta.sum())
    stderr = float(np.sqrt((cond_var / counts).sum()) / m)
    return GmiEstimate(
        gmi=gmi, stderr=stderr, beta=beta, beta_stderr=beta_stderr, n=n, s=spec.s
    )


@dataclass(frozen=True)
class GmiReport:
    """Best achievable rate found over the metric exponent."""

    gmi: float
    s_opt: float
    stderr: float
    beta: np.ndarray
    beta_stderr: np.ndarray
    n: int


_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def optimize_s(
    samples: ChannelSamples,
    spec: MetricSpec,
    s_grid=DEFAULT_S_GRID,
    tol: float = 1e-3,
) -> GmiReport:
    """Maximize the estimated rate over the metric exponent.

    Evaluates the grid, then refines between the best grid point's
    neighbors with a golden-section search down to an interval of width
    tol; the search never leaves the grid's range.  The report carries
    the best estimate seen anywhere, so it can never be worse than the
    best grid evaluation.  spec.s is ignored.
    """
    s_grid = sorted(float(s) for s in s_grid)
    if len(s_grid) < 2 or s_grid[0] <= 0:
        raise ValueError("s_grid needs at least two positive values")

    cache: dict[float, GmiEstimate] = {}

    def evaluate(s: float) -> GmiEstimate:
        if s not in cache:
            cache[s] = estimate_gmi(samples, spec.with_s(s))
        return cache[s]

    for s in s_grid:
        evaluate(s)
    best_i = int(np.argmax([cache[s].gmi for s in s_grid]))
    lo = s_grid[max(best_i - 1, 0)]
    hi = s_grid[min(best_i + 1, len(s_grid) - 1)]

    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    while hi - lo > tol:
        if evaluate(x1).gmi < evaluate(x2).gmi:
            lo, x1 = x1, x2
            x2 = lo + _GOLDEN * (hi - lo)
        else:
            hi, x2 = x2, x1
            x1 = hi - _GOLDEN * (hi - lo)

    s_best = max(cache, key=lambda s: cache[s].gmi)
    est = cache[s_best]
    return GmiReport(
        gmi=est.gmi,
        s_opt=float(s_best),
        stderr=est.stderr,
        beta=est.beta,
        beta_stderr=est.beta_stderr,
        n=est.n,
    )


def sample_channel(
    cfg: LinkConfig,
    mode: str,
    n: int,
    seed=0,
    variance_model: VarianceModel | None = None,
    rin_on: bool = True,
) -> ChannelSamples:
    """Draw n symbol-rate channel observations.

    "waveform" runs the full oversampled chain (thermal noise always on,
    intensity noise per rin_on).  "surrogate" skips the waveform and draws
    Gaussian samples whose per-level variance is sigma_q_sq plus the
    variance_model prediction; it needs an explicit model when rin_on.
    Both modes derive the symbol and noise streams independently from the
    seed, so the transmitted sequence is reproducible on its own.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    sym_seq, noise_seq = seq.spawn(2)
    const = cfg.constellation()
    if mode == "waveform":
        symbols = draw_symbols(const, n + 2 * cfg.span, seed=sym_seq)
        switches = NoiseSwitches(rin_on=rin_on, thermal_on=True)
        block = simulate_link(cfg, symbols, switches, seed=noise_seq)
        return ChannelSamples(indices=block.indices, levels=block.a, y=block.y)
    if mode == "surrogate":
        if rin_on and variance_model is None:
            raise ValueError("surrogate mode with rin_on needs a variance_model")
        symbols = draw_symbols(const, n, seed=sym_seq)
        idx = symbols.indices
        a = const.levels[idx]
        var = np.full(n, cfg.sigma_q_sq())
        if rin_on:
            var = var + variance_model.evaluate(a)
        y = a + np.random.default_rng(noise_seq).standard_normal(n) * np.sqrt(var)
        return ChannelSamples(indices=idx, levels=a, y=y)
    raise ValueError(f"unknown mode {mode!r}; expected 'waveform' or 'surrogate'")
