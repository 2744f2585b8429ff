"""Conditional variance of the intensity-noise contribution at the sampler.

The multiplicative laser noise rides on the pulse-shaped waveform, so after
the receive filter its power at symbol k depends on the neighboring symbols
through the overlap kernel of the pulse/filter pair.  Averaging the
neighbors out (keeping the center symbol fixed) gives a per-level variance
with three contributions: a floor from the neighbor symbols alone, a term
linear in the center level from cross products, and the familiar quadratic
term.  The memoryless model keeps only the quadratic term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constellation import Constellation, draw_symbols
from .filters import OverlapKernel
from .waveform import LinkConfig, NoiseSwitches, simulate_link

#: Default one-sided neighbor memory used when evaluating the variance.
DEFAULT_MEMORY = 16

#: Smallest sample count accepted by the empirical estimator; below this the
#: per-level variance confidence intervals are too wide to be meaningful.
MIN_GENIE_SAMPLES = 100_000


@dataclass(frozen=True)
class VarianceModel:
    """Per-level noise variance in polynomial form.

    evaluate(a) returns 0.5 * n0_rin * (p0 + p1 * a + p2 * a**2), the
    conditional variance of the filtered intensity noise when the center
    symbol carries level a.  kind records which model produced the
    coefficients: "theorem2" (memory-aware) or "legacy" (memoryless, where
    p0 = p1 = 0 and p2 is the filter energy).
    """

    p0: float
    p1: float
    p2: float
    n0_rin: float
    memory: int
    kind: str

    def __post_init__(self):
        if self.n0_rin < 0:
            raise ValueError("n0_rin must be nonnegative")
        if self.kind not in ("theorem2", "legacy"):
            raise ValueError(f"unknown variance kind {self.kind!r}")

    def evaluate(self, level):
        level = np.asarray(level, dtype=float)
        return 0.5 * self.n0_rin * (self.p0 + self.p1 * level + self.p2 * level**2)


def conditional_variance(
    constellation: Constellation, kernel: OverlapKernel, level: float, n0_rin: float
) -> float:
    """Direct double-sum evaluation of the conditional variance.

    Builds the full matrix of cross-moments E[A_i A_j | A_center = level]
    over the kernel's neighbor window and contracts it with the kernel.
    The moments split into four cases: center twice (level^2), center once
    (level * m1), same neighbor twice (m2), two distinct neighbors (m1^2).
    """
    if level <= 0:
        raise ValueError(f"level must be positive, got {level}")
    if n0_rin < 0:
        raise ValueError("n0_rin must be nonnegative")
    n = 2 * kernel.ell + 1
    c = kernel.ell
    moments = np.full((n, n), constellation.m1**2)
    moments[np.diag_indices(n)] = constellation.m2
    moments[c, :] = constellation.m1 * level
    moments[:, c] = constellation.m1 * level
    moments[c, c] = level**2
    return float(0.5 * n0_rin * np.sum(moments * kernel.values))


def polynomial_coeffs(
    constellation: Constellation, kernel: OverlapKernel, n0_rin: float
) -> VarianceModel:
    """Regroup the double sum into polynomial coefficients in the level.

    p2 collects the center-center kernel entry, p1 the row and column
    through the center (each neighbor pairs with the center once in each
    order), and p0 everything not involving the center: the neighbor
    diagonal weighted by m2 and the distinct-neighbor pairs weighted by
    m1^2.
    """
    v = kernel.values
    c = kernel.ell
    m1, m2 = constellation.m1, constellation.m2
    center = v[c, c]
    diag = float(np.trace(v)) - center
    row = float(v[c, :].sum()) - center
    total = float(v.sum())
    p2 = center
    p1 = 2.0 * m1 * row
    p0 = m2 * diag + m1**2 * (total - (diag + center) - 2.0 * row)
    return VarianceModel(
        p0=p0, p1=p1, p2=p2, n0_rin=n0_rin, memory=kernel.ell, kind="theorem2"
    )


def legacy_model(n0_rin: float, h_norm_sq: float) -> VarianceModel:
    """Memoryless model: variance 0.5 * n0_rin * level^2 * filter energy."""
    if h_norm_sq <= 0:
        raise ValueError("h_norm_sq must be positive")
    return VarianceModel(
        p0=0.0, p1=0.0, p2=h_norm_sq, n0_rin=n0_rin, memory=0, kind="legacy"
    )


def legacy_variance(level, n0_rin: float, h_norm_sq: float):
    """Convenience evaluation of the memoryless variance at one level."""
    return legacy_model(n0_rin, h_norm_sq).evaluate(level)


@dataclass(frozen=True)
class EmpiricalVariance:
    """Per-level residual statistics from a brute-force link simulation."""

    levels: np.ndarray
    variances: np.ndarray
    stderrs: np.ndarray
    means: np.ndarray
    counts: np.ndarray


def genie_variance(
    cfg: LinkConfig,
    n: int,
    seed=0,
    switches: NoiseSwitches = NoiseSwitches(rin_on=True, thermal_on=False),
) -> EmpiricalVariance:
    """Estimate the per-level residual variance by running the full chain.

    This is the model-free reference the analytic variance is judged
    against: residuals y - a are grouped by transmitted level and their
    sample variances returned with Gaussian-approximation standard errors
    var * sqrt(2 / (count - 1)).
    """
    if n < MIN_GENIE_SAMPLES:
        raise ValueError(f"need at least {MIN_GENIE_SAMPLES} symbols, got {n}")
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    sym_seq, link_seq = seq.spawn(2)
    const = cfg.constellation()
    symbols = draw_symbols(const, n + 2 * cfg.span, seed=sym_seq)
    block = simulate_link(cfg, symbols, switches, seed=link_seq)
    m = const.order
    counts = np.bincount(block.indices, minlength=m)
    if counts.min() == 0:
        raise ValueError("a constellation level drew no symbols; increase n")
    sums = np.bincount(block.indices, weights=block.z_plus_q, minlength=m)
    means = sums / counts
    centered_sq = (block.z_plus_q - means[block.indices]) ** 2
    variances = np.bincount(block.indices, weights=centered_sq, minlength=m) / (counts - 1)
    stderrs = variances * np.sqrt(2.0 / (counts - 1))
    return EmpiricalVariance(
        levels=const.levels.copy(),
        variances=variances,
        stderrs=stderrs,
        means=means,
        counts=counts,
    )


@dataclass(frozen=True)
class MemorySweep:
    """Analytic variance as a function of the neighbor memory."""

    memories: np.ndarray
    variances: np.ndarray  # shape (n_memories, order)
    converged_memory: int


def variance_vs_memory(
    constellation: Constellation,
    kernel: OverlapKernel,
    n0_rin: float,
    rel_tol: float = 0.01,
) -> MemorySweep:
    """Sweep the neighbor memory from 0 to the kernel's full extent.

    Reports the smallest memory whose per-level variances all sit within
    rel_tol (relative) of the full-memory values.
    """
    if not 0 < rel_tol < 1:
        raise ValueError(f"rel_tol must be in (0, 1), got {rel_tol}")
    memories = np.arange(kernel.ell + 1)
    rows = []
    for ell in memories:
        model = polynomial_coeffs(constellation, kernel.truncated(int(ell)), n0_rin)
        rows.append(model.evaluate(constellation.levels))
    variances = np.asarray(rows)
    full = variances[-1]
    rel = np.abs(variances - full) / full
    ok = np.all(rel <= rel_tol, axis=1)
    converged = int(memories[np.argmax(ok)]) if ok.any() else int(memories[-1])
    return MemorySweep(memories=memories, variances=variances, converged_memory=converged)
