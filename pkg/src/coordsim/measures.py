"""Information measures and the central-limit machinery behind them.

Everything here feeds the finite-blocklength rate bounds: mutual
information sets the asymptotic rates, the variance of the information
density (the dispersion) sets the square-root backoff, and the third
absolute moment drives the Berry-Esseen constant that prices how fast the
Gaussian approximation becomes trustworthy.

Moment conventions
------------------
Densities are in bits, so the moments are bits / bits^2 / bits^3.  The
Berry-Esseen constant used throughout is B = 6 T / V^(3/2) with T the third
absolute central moment and V the variance.  A degenerate density (V = 0,
which happens exactly for deterministic-copy chains) has no meaningful B;
it is stored as NaN and contributes 0 to any B/sqrt(n) penalty, since the
underlying CLT gap is identically zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .probability import ConditionalPmf, DensityTable, JointPmf, Pmf, info_density

# variance below this (bits^2) is float dust from a constant density
DEGENERATE_VAR = 1e-20


@dataclass(frozen=True)
class BEStats:
    """First three moments of a density under a weighting law.

    mu  -- mean (bits)
    v   -- variance (bits^2); exactly 0.0 for degenerate densities
    t3  -- third absolute central moment (bits^3)
    b   -- Berry-Esseen constant 6 t3 / v^(3/2); NaN when v == 0
    """

    mu: float
    v: float
    t3: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.v) and math.isfinite(self.t3)):
            raise DomainError("BEStats moments must be finite")
        if self.v < 0 or self.t3 < 0:
            raise DomainError(f"BEStats needs v, t3 >= 0, got v={self.v}, t3={self.t3}")
        if self.v > 0:
            ref = 6.0 * self.t3 / self.v ** 1.5
            if not math.isfinite(self.b) or abs(self.b - ref) > 1e-10 * max(1.0, abs(ref)):
                raise DomainError(f"BEStats b={self.b} inconsistent with 6 t3 / v^1.5 = {ref}")
        elif not math.isnan(self.b):
            raise DomainError("degenerate BEStats (v = 0) must carry b = NaN")

    @property
    def degenerate(self) -> bool:
        return self.v == 0.0

    def b_over_sqrt_n(self, n: int) -> float:
        """Berry-Esseen penalty B / sqrt(n); 0 for degenerate densities."""
        if n < 1:
            raise DomainError(f"blocklength must be >= 1, got {n}")
        return 0.0 if self.degenerate else self.b / math.sqrt(n)


def be_stats(density: DensityTable, weights: Pmf | JointPmf) -> BEStats:
    """Moments of ``density`` under ``weights``.

    The weighting law must live on the density's support (mass off support
    raises ``DomainError`` with the offending cell).
    """
    w = weights.probs
    if w.shape != density.shape:
        raise ShapeError(f"weights shape {w.shape} != density shape {density.shape}")
    off = (w > 0) & ~density.support
    if np.any(off):
        bad = np.unravel_index(int(np.argmax(off)), w.shape)
        raise DomainError("weights put mass outside the density's support", index=bad)
    mask = density.support
    vals = density.values[mask]
    ws = w[mask]
    mu = float(np.dot(ws, vals))
    centered = vals - mu
    v = float(np.dot(ws, centered ** 2))
    t3 = float(np.dot(ws, np.abs(centered) ** 3))
    if v < DEGENERATE_VAR:
        return BEStats(mu=mu, v=0.0, t3=0.0, b=float("nan"))
    return BEStats(mu=mu, v=v, t3=t3, b=6.0 * t3 / v ** 1.5)


def mutual_information(joint: JointPmf) -> float:
    """Mutual information (bits) between the two axes of a joint."""
    if joint.probs.ndim != 2:
        raise ShapeError(f"mutual_information needs a two-axis joint, got rank {joint.probs.ndim}")
    return be_stats(info_density(joint), joint).mu


def dispersion_of_channel(p_in: Pmf, ch: ConditionalPmf) -> BEStats:
    """Moments of the input-output information density for ``p_in`` driving
    ``ch`` -- mean is the mutual information, v is the (unconditional)
    dispersion."""
    if ch.input_size != p_in.size:
        raise ShapeError(f"channel expects {ch.input_size} inputs, p_in has {p_in.size}")
    joint = JointPmf(p_in.probs[:, None] * ch.rows)
    return be_stats(info_density(joint), joint)


def conditional_dispersion(p_in: Pmf, ch: ConditionalPmf) -> float:
    """Input-conditional variance of the information density,
    E_X[ Var(i(X;Y) | X) ] -- the alternative dispersion form.

    Kept as a diagnostic: the bounds in this package use the unconditional
    variance, and the two genuinely differ off capacity-achieving inputs.
    """
    if ch.input_size != p_in.size:
        raise ShapeError(f"channel expects {ch.input_size} inputs, p_in has {p_in.size}")
    joint = JointPmf(p_in.probs[:, None] * ch.rows)
    dens = info_density(joint)
    total = 0.0
    for x in range(p_in.size):
        px = p_in.probs[x]
        if px <= 0:
            continue
        row_mask = dens.support[x]
        w = ch.rows[x][row_mask]
        vals = dens.values[x][row_mask]
        mu_x = float(np.dot(w, vals))
        total += px * float(np.dot(w, (vals - mu_x) ** 2))
    return total


# =============================================================================
# Gaussian tail
# =============================================================================

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gaussian_q(t: float) -> float:
    """Standard normal upper tail Q(t) = P(N(0,1) > t)."""
    return 0.5 * math.erfc(t / _SQRT2)


def gaussian_q_inv(eps: float) -> float:
    """Inverse upper tail: the t with Q(t) = eps, for eps in (0, 1).

    Bracketing bisection followed by Newton polish; the result satisfies
    |Q(t) - eps| <= 1e-12 everywhere in that range.  eps outside (0,1) raises
    ``DomainError``.
    """
    if not (isinstance(eps, (int, float)) and 0.0 < eps < 1.0):
        raise DomainError(f"gaussian_q_inv needs eps in (0, 1), got {eps!r}")
    lo, hi = -8.0, 8.0  # Q decreasing: Q(lo) > eps > Q(hi) once the bracket holds
    while gaussian_q(lo) < eps:
        lo *= 2.0
    while gaussian_q(hi) > eps:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if gaussian_q(mid) > eps:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    for _ in range(4):  # Newton on Q(t) - eps = 0, Q' = -phi
        phi = _INV_SQRT_2PI * math.exp(-0.5 * t * t)
        if phi <= 0.0:
            break
        step = (gaussian_q(t) - eps) / phi
        t_new = t + step
        if abs(gaussian_q(t_new) - eps) <= abs(gaussian_q(t) - eps):
            t = t_new
    return t
