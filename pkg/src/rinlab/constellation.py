"""Optical PAM constellations and symbol sources.

All optical quantities are kept in SI units (watts); dBm and dB appear only
at configuration boundaries via the converters below.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def dbm_to_watts(x: float) -> float:
    """Convert a power level in dBm to watts."""
    return 10.0 ** (x / 10.0) * 1e-3


def watts_to_dbm(x: float) -> float:
    """Convert a power level in watts to dBm."""
    if x <= 0:
        raise ValueError(f"power must be positive, got {x}")
    return 10.0 * np.log10(x / 1e-3)


def db_to_linear(x: float) -> float:
    """Convert a ratio in dB to a linear ratio."""
    return 10.0 ** (x / 10.0)


@dataclass(frozen=True)
class Constellation:
    """Equally likely optical PAM levels with precomputed power moments.

    levels are optical powers in watts, strictly increasing and positive.
    m1 and m2 are the mean and mean-square of the levels under a uniform
    prior; both are computed from the discrete levels, never from closed
    forms, so non-uniform spacings would be handled transparently.
    """

    levels: np.ndarray
    m1: float = field(init=False)
    m2: float = field(init=False)

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        object.__setattr__(self, "levels", levels)
        if levels.ndim != 1 or len(levels) < 2:
            raise ValueError("need at least two levels")
        m = len(levels)
        if m & (m - 1) != 0:
            raise ValueError(f"order must be a power of 2, got {m}")
        if levels[0] <= 0:
            raise ValueError("all levels must be positive")
        if np.any(np.diff(levels) <= 0):
            raise ValueError("levels must be strictly increasing")
        object.__setattr__(self, "m1", float(levels.mean()))
        object.__setattr__(self, "m2", float((levels**2).mean()))

    @property
    def order(self) -> int:
        return len(self.levels)

    @property
    def oma(self) -> float:
        """Optical modulation amplitude: span between outermost levels (W)."""
        return float(self.levels[-1] - self.levels[0])

    @property
    def er(self) -> float:
        """Extinction ratio: top level over bottom level (linear)."""
        return float(self.levels[-1] / self.levels[0])


def build_constellation(m: int, oma: float, er: float) -> Constellation:
    """Build M equally spaced optical levels meeting OMA and ER constraints.

    The bottom level is oma/(er - 1) and the top level is er times that, so
    top - bottom = oma and top/bottom = er hold exactly.  er = 1 collapses
    the constellation and er -> inf needs a zero bottom level; both are
    rejected.
    """
    if m < 2:
        raise ValueError(f"order must be >= 2, got {m}")
    if oma <= 0:
        raise ValueError(f"oma must be positive, got {oma}")
    if er <= 1:
        raise ValueError(f"extinction ratio must exceed 1, got {er}")
    lo = oma / (er - 1.0)
    return Constellation(np.linspace(lo, er * lo, m))


@dataclass(frozen=True)
class SymbolSequence:
    """Level indices of an i.u.d. symbol stream."""

    indices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))

    def __len__(self) -> int:
        return len(self.indices)


def draw_symbols(constellation: Constellation, n: int, seed: int) -> SymbolSequence:
    """Draw n independent uniform level indices from a seeded stream."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    return SymbolSequence(rng.integers(0, constellation.order, size=n))
