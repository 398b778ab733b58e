"""Exact verification of the Gaussian tail approximation.

The finite-blocklength bounds replace sums of iid information densities by
a Gaussian tail plus a Berry-Esseen remainder B/sqrt(n).  This module makes
that step checkable: it pushes a density forward into a scalar atom law,
convolves it exactly n times, and measures the true worst-case gap between
the normalized tail and Q(t).

The gap supremum is exact, not sampled: the tail of a discrete sum is a
step function of the threshold, so |tail - Q| is extremal only at atom
jump points, and evaluating both one-sided limits at every atom covers all
candidates.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .measures import BEStats, DEGENERATE_VAR, gaussian_q
from .probability import NORM_TOL, DensityTable, JointPmf, Pmf, check_table_size

# atoms closer than this (bits) are the same point up to float noise
ATOM_MERGE_TOL = 1e-12


@dataclass(frozen=True)
class AtomLaw:
    """Law of a scalar statistic: strictly increasing atom values with
    their probabilities (summing to 1 within 1e-12)."""

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        p = np.array(self.probs, dtype=np.float64, copy=True)
        if v.ndim != 1 or p.ndim != 1 or v.shape != p.shape or v.size == 0:
            raise ShapeError(f"AtomLaw needs matching non-empty 1-D arrays, got {v.shape} / {p.shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("AtomLaw values must be finite")
        if np.any(np.diff(v) <= 0):
            bad = int(np.argmax(np.diff(v) <= 0))
            raise DomainError("AtomLaw values must be strictly increasing", index=bad + 1)
        if np.any(p < 0):
            raise DomainError("AtomLaw probabilities must be nonnegative")
        total = float(p.sum())
        if abs(total - 1.0) > NORM_TOL:
            raise DomainError(f"AtomLaw probabilities sum to {total!r}, not 1 within {NORM_TOL}")
        v.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probs", p)

    @property
    def n_atoms(self) -> int:
        return self.values.shape[0]

    def tail_gt(self, x: float) -> float:
        """P(Z > x), strict."""
        i = bisect_left(self.values, x)
        while i < self.n_atoms and self.values[i] <= x:
            i += 1
        return float(self.probs[i:].sum())

    def tail_ge(self, x: float) -> float:
        """P(Z >= x)."""
        i = bisect_left(self.values, x)
        return float(self.probs[i:].sum())


@dataclass(frozen=True)
class BEGapResult:
    """Measured CLT gap vs. its Berry-Esseen budget at one blocklength."""

    gap: float
    bound: float
    degenerate: bool


def _merge_sorted(values: np.ndarray, probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Coalesce already-sorted atoms that coincide up to ATOM_MERGE_TOL."""
    out_v: list[float] = []
    out_p: list[float] = []
    for v, p in zip(values, probs):
        if out_v and v - out_v[-1] <= ATOM_MERGE_TOL:
            out_p[-1] += p
        else:
            out_v.append(float(v))
            out_p.append(float(p))
    return np.array(out_v), np.array(out_p)


def density_law(density: DensityTable, weights: Pmf | JointPmf) -> AtomLaw:
    """Pushforward of a density table under a weighting law: the scalar law
    of the density value at a random cell.

    Zero-mass support cells are dropped; weights off support raise
    ``DomainError`` (same contract as the moment computation).
    """
    w = weights.probs
    if w.shape != density.shape:
        raise ShapeError(f"weights shape {w.shape} != density shape {density.shape}")
    off = (w > 0) & ~density.support
    if np.any(off):
        bad = np.unravel_index(int(np.argmax(off)), w.shape)
        raise DomainError("weights put mass outside the density's support", index=bad)
    mask = density.support & (w > 0)
    vals = density.values[mask]
    probs = w[mask]
    order = np.argsort(vals, kind="stable")
    merged_v, merged_p = _merge_sorted(vals[order], probs[order])
    return AtomLaw(merged_v, merged_p)


def _convolve(a: AtomLaw, b: AtomLaw) -> AtomLaw:
    check_table_size(a.n_atoms * b.n_atoms, "convolution grid")
    sums = np.add.outer(a.values, b.values).ravel()
    masses = np.multiply.outer(a.probs, b.probs).ravel()
    order = np.argsort(sums, kind="stable")
    merged_v, merged_p = _merge_sorted(sums[order], masses[order])
    return AtomLaw(merged_v, merged_p / merged_p.sum())


def convolve_n(law: AtomLaw, n: int) -> AtomLaw:
    """Exact law of the sum of n iid copies (binary exponentiation with
    atom merging; table sizes capped)."""
    if n < 1:
        raise DomainError(f"convolution power must be >= 1, got {n}")
    result: AtomLaw | None = None
    power = law
    k = n
    while k:
        if k & 1:
            result = power if result is None else _convolve(result, power)
        k >>= 1
        if k:
            power = _convolve(power, power)
    return result


def law_stats(law: AtomLaw) -> BEStats:
    """First three moments of an atom law (same conventions as be_stats)."""
    mu = float(np.dot(law.probs, law.values))
    centered = law.values - mu
    v = float(np.dot(law.probs, centered ** 2))
    t3 = float(np.dot(law.probs, np.abs(centered) ** 3))
    if v < DEGENERATE_VAR:
        return BEStats(mu=mu, v=0.0, t3=0.0, b=float("nan"))
    return BEStats(mu=mu, v=v, t3=t3, b=6.0 * t3 / v ** 1.5)


def be_gap(law: AtomLaw, n: int) -> BEGapResult:
    """Worst-case gap between the exact normalized tail of the n-fold sum
    and the Gaussian tail, next to its Berry-Esseen budget.

    gap   = sup_t | P{ S_n > n mu + t sqrt(n v) } - Q(t) |
    bound = B / sqrt(n)

    Degenerate laws (v = 0) have zero gap by convention: the sum is a
    constant and the statistic never normalizes; the flag marks it.
    """
    if n < 1:
        raise DomainError(f"blocklength must be >= 1, got {n}")
    stats = law_stats(law)
    if stats.degenerate:
        return BEGapResult(gap=0.0, bound=0.0, degenerate=True)
    total = convolve_n(law, n)
    scale = math.sqrt(n * stats.v)
    center = n * stats.mu
    # suffix sums: tail_ge[i] = P(S_n >= value_i); tail_gt[i] = P(S_n > value_i)
    suffix = np.concatenate([np.cumsum(total.probs[::-1])[::-1], [0.0]])
    worst = 0.0
    for i, x in enumerate(total.values):
        t = (x - center) / scale
        q = gaussian_q(t)
        worst = max(worst, abs(suffix[i] - q), abs(suffix[i + 1] - q))
    return BEGapResult(gap=worst, bound=stats.b_over_sqrt_n(n), degenerate=False)
