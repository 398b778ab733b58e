"""Finite-blocklength rate region: inner and outer bounds with dispersion.

A *decomposition* splits a target correlation on U x V through an auxiliary
W so that U - W - V is a Markov chain.  The asymptotic region needs rate
R >= I(W;U) on the message and sum rate R + R0 >= I(W;UV); at blocklength n
both constraints pick up a Gaussian dispersion backoff Q^,-1(eps)*sqrt(V/n)
plus lower-order terms:

* inner (achievability): additive gamma/n terms from the binning analysis,
  and a total-variation budget priced by the Berry-Esseen-corrected
  eps* = eps + B/sqrt(n);
* outer (converse): a log(alpha - y - B/sqrt(n))/n correction whose argument
  is positive only in the high-eps regime, plus (on the sum rate) a
  -4 eps (log2|U x V| + log2(1/eps)) continuity term.

Every log is base 2; rates are bits/symbol.  Degenerate dispersions (V = 0,
deterministic-copy chains) drop their Q^-1 and B/sqrt(n) terms entirely --
the Gaussian approximation is exact there with zero width.

Outer-bound validity: the log argument is <= 0 whenever eps <= y, i.e. for
every eps < 1/2 given the y range (1/2, 1).  Such points carry valid=False
and *omit* the log term from the reported rate (left finite on purpose so
asymptotic sweeps can still plot the Gaussian part); `notes` records the
rejected argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError
from .measures import BEStats, be_stats, gaussian_q_inv
from .probability import (
    ConditionalPmf,
    JointPmf,
    Pmf,
    compose_chain,
    info_density,
    marginalize,
    regroup_pair,
)

# =============================================================================
# types
# =============================================================================


@dataclass(frozen=True)
class Decomposition:
    """Markov splitting U - W - V of a target (U,V) correlation.

    The auxiliary alphabet obeys the cardinality bound
    |W| <= |U| * |V| + 1 (enforced at construction).
    """

    p_u: Pmf
    w_given_u: ConditionalPmf
    v_given_w: ConditionalPmf

    def __post_init__(self):
        if self.w_given_u.input_size != self.p_u.size:
            raise DomainError(
                f"w_given_u expects {self.w_given_u.input_size} inputs, p_u has {self.p_u.size}"
            )
        if self.v_given_w.input_size != self.w_given_u.output_size:
            raise DomainError(
                f"v_given_w expects {self.v_given_w.input_size} inputs, "
                f"w_given_u outputs {self.w_given_u.output_size}"
            )
        cap = self.u_size * self.v_size + 1
        if self.w_size > cap:
            raise DomainError(
                f"auxiliary alphabet size {self.w_size} exceeds |U|*|V|+1 = {cap}"
            )

    @property
    def u_size(self) -> int:
        return self.p_u.size

    @property
    def w_size(self) -> int:
        return self.w_given_u.output_size

    @property
    def v_size(self) -> int:
        return self.v_given_w.output_size

    def joint(self) -> JointPmf:
        """Exact joint over axes ("u", "w", "v")."""
        return compose_chain(self.p_u, self.w_given_u, self.v_given_w)

    def uv_marginal(self) -> JointPmf:
        return marginalize(self.joint(), ("u", "v"))


@dataclass(frozen=True)
class GammaTriple:
    """The three slack parameters (bits) of the binning analysis."""

    g1: float
    g2: float
    g3: float

    def __post_init__(self):
        for name, g in (("g1", self.g1), ("g2", self.g2), ("g3", self.g3)):
            if not (isinstance(g, (int, float)) and math.isfinite(g) and g > 0):
                raise DomainError(f"GammaTriple.{name} must be a positive real, got {g!r}")


@dataclass(frozen=True)
class RegionPoint:
    """One evaluated point of a rate region boundary.

    For inner points, eps_tot_bound is the total-variation budget and valid
    is always True.  For outer points, eps_tot_bound is None and valid marks
    whether every log correction had a positive argument.
    """

    r_min: float
    r_plus_r0_min: float
    eps_tot_bound: float | None
    valid: bool
    notes: dict = field(default_factory=dict)


# =============================================================================
# per-decomposition density statistics
# =============================================================================


def stats_wu(d: Decomposition) -> BEStats:
    """Moments of the information density between W and U."""
    pair = regroup_pair(marginalize(d.joint(), ("u", "w")), "w", "u")
    return be_stats(info_density(pair), pair)


def stats_wuv(d: Decomposition) -> BEStats:
    """Moments of the information density between W and the pair (U, V)."""
    pair = regroup_pair(d.joint(), "w", ("u", "v"))
    return be_stats(info_density(pair), pair)


def asymptotic_region(d: Decomposition) -> tuple[float, float]:
    """The two first-order rate thresholds (I(W;U), I(W;UV)) in bits/symbol."""
    return stats_wu(d).mu, stats_wuv(d).mu


# =============================================================================
# gamma rules
# =============================================================================


def parse_gamma_rule(rule: str, n: int) -> GammaTriple:
    """Materialize a named gamma rule at blocklength n.

    "logn"          -> (log2 n, log2(n)/2, log2 n)   (needs n >= 2)
    "linear:c"      -> (2cn, cn, 2cn)
    "fixed:a,b,c"   -> constants (a, b, c)
    """
    if rule == "logn":
        if n < 2:
            raise DomainError("gamma rule 'logn' needs n >= 2 (log2 1 = 0 is not a valid gamma)")
        L = math.log2(n)
        return GammaTriple(L, 0.5 * L, L)
    if rule.startswith("linear:"):
        c = float(rule.split(":", 1)[1])
        if c <= 0:
            raise DomainError(f"gamma rule 'linear:c' needs c > 0, got {c}")
        return GammaTriple(2 * c * n, c * n, 2 * c * n)
    if rule.startswith("fixed:"):
        parts = rule.split(":", 1)[1].split(",")
        if len(parts) != 3:
            raise DomainError(f"gamma rule 'fixed:' needs three comma-separated values, got {rule!r}")
        a, b, c = (float(p) for p in parts)
        return GammaTriple(a, b, c)
    raise DomainError(f"unknown gamma rule {rule!r}")


# =============================================================================
# bounds
# =============================================================================


def _check_eps(name: str, eps: float) -> None:
    if not (isinstance(eps, (int, float)) and 0.0 < eps < 1.0):
        raise DomainError(f"{name} must lie in (0, 1), got {eps!r}")


def _gaussian_term(stats: BEStats, eps: float, n: int) -> float:
    """Dispersion backoff Q^-1(eps) * sqrt(V/n); exactly 0 for degenerate V."""
    if stats.degenerate:
        return 0.0
    return gaussian_q_inv(eps) * math.sqrt(stats.v / n)


def inner_bound(d: Decomposition, eps1: float, eps2: float, n: int, g: GammaTriple) -> RegionPoint:
    """Achievability point at blocklength n.

    eps2 prices the message-rate constraint (pair W;U), eps1 the sum-rate
    constraint (pair W;UV).  The returned eps_tot_bound is the full
    total-variation budget including tail terms and the Berry-Esseen
    corrections eps* = eps + B/sqrt(n).
    """
    _check_eps("eps1", eps1)
    _check_eps("eps2", eps2)
    if n < 1:
        raise DomainError(f"blocklength must be >= 1, got {n}")
    s_wu = stats_wu(d)
    s_wuv = stats_wuv(d)
    r_min = s_wu.mu + _gaussian_term(s_wu, eps2, n) + (g.g1 + g.g2) / n
    rr0_min = s_wuv.mu + _gaussian_term(s_wuv, eps1, n) + (g.g2 + g.g3) / n
    eps1_star = eps1 + s_wuv.b_over_sqrt_n(n)
    eps2_star = eps2 + s_wu.b_over_sqrt_n(n)
    tail = 2.0 * (2.0 ** (-(g.g1 + 1.0) / 2.0) + 5.0 * 2.0 ** (-g.g2) + 2.0 ** (-(g.g3 + 1.0) / 2.0))
    eps_tot = 10.0 * (eps1_star + eps2_star) + tail
    return RegionPoint(
        r_min=r_min,
        r_plus_r0_min=rr0_min,
        eps_tot_bound=eps_tot,
        valid=True,
        notes={
            "eps1_star": eps1_star,
            "eps2_star": eps2_star,
            "gamma_tail": tail,
            "i_wu": s_wu.mu,
            "i_wuv": s_wuv.mu,
        },
    )


def outer_bound(d: Decomposition, eps: float, n: int, y: float = 0.75) -> RegionPoint:
    """Converse point at blocklength n.

    The split parameter y must lie in (1/2, 1).  Whenever a log argument
    alpha - y - B/sqrt(n) is nonpositive the point is flagged valid=False
    and that log term is omitted from the reported rate (see module notes);
    nothing is ever thrown for regime reasons.
    """
    _check_eps("eps", eps)
    if n < 1:
        raise DomainError(f"blocklength must be >= 1, got {n}")
    if not (0.5 < y < 1.0):
        raise DomainError(f"split parameter y must lie in (0.5, 1), got {y!r}")
    s_wu = stats_wu(d)
    s_wuv = stats_wuv(d)
    g_eps = 2.0 * eps * (math.log2(d.u_size * d.v_size) + math.log2(1.0 / eps))

    def log_arg(stats: BEStats) -> float:
        # alpha = eps - B/sqrt(n); argument = alpha - y - B/sqrt(n)
        return eps - y - 2.0 * stats.b_over_sqrt_n(n)

    arg_r = log_arg(s_wu)
    arg_rr0 = log_arg(s_wuv)
    valid = arg_r > 0.0 and arg_rr0 > 0.0
    r_min = s_wu.mu + _gaussian_term(s_wu, eps, n)
    if arg_r > 0.0:
        r_min += math.log2(arg_r) / n
    rr0_min = s_wuv.mu + _gaussian_term(s_wuv, eps, n) - 2.0 * g_eps
    if arg_rr0 > 0.0:
        rr0_min += math.log2(arg_rr0) / n
    return RegionPoint(
        r_min=r_min,
        r_plus_r0_min=rr0_min,
        eps_tot_bound=None,
        valid=valid,
        notes={
            "alpha_wu": eps - s_wu.b_over_sqrt_n(n),
            "alpha_wuv": eps - s_wuv.b_over_sqrt_n(n),
            "log_arg_r": arg_r,
            "log_arg_rr0": arg_rr0,
            "g_eps": g_eps,
            "i_wu": s_wu.mu,
            "i_wuv": s_wuv.mu,
        },
    )


def gamma_tradeoff(xs, n: int, eps1: float, eps2: float) -> list[tuple[float, float]]:
    """Rate-penalty / error-budget pairs for the one-parameter gamma family
    (2x, x, 2x): penalty 3x/n against budget 10(eps1+eps2) + 2(sqrt2+5) 2^-x.

    x = 0 is accepted (zero-penalty endpoint, budget 2(sqrt2+5) at zero eps);
    eps here enters raw, without Berry-Esseen stars -- this is the knob-
    isolating form of the tradeoff, not the full achievability budget.
    """
    if n < 1:
        raise DomainError(f"blocklength must be >= 1, got {n}")
    for name, e in (("eps1", eps1), ("eps2", eps2)):
        if not (isinstance(e, (int, float)) and 0.0 <= e < 1.0):
            raise DomainError(f"{name} must lie in [0, 1), got {e!r}")
    out = []
    scale = 2.0 * (math.sqrt(2.0) + 5.0)
    for x in xs:
        if not (isinstance(x, (int, float)) and math.isfinite(x) and x >= 0.0):
            raise DomainError(f"tradeoff parameter must be a nonnegative real, got {x!r}")
        out.append((3.0 * x / n, 10.0 * (eps1 + eps2) + scale * 2.0 ** (-x)))
    return out


def closed_result_check(d: Decomposition, eps: float, n: int) -> bool:
    """Check that the converse point sits componentwise below the matching
    achievability point, so the first- and second-order terms agree and the
    gap is only the O(log n / n) vs O(1/n) slack.

    Built with matching constants: same eps on both sides and on both inner
    constraints, the (log n, log n / 2, log n) gamma rule, default y.  When
    the outer point is invalid (its log corrections undefined at this eps)
    the comparison is vacuously true -- there is no converse point to beat.
    """
    if n < 2:
        raise DomainError(f"closed_result_check needs n >= 2, got {n}")
    # order domination k/n <= k log2(n)/n of the slack scales
    if not (1.0 / n <= math.log2(n) / n + 1e-15):
        return False
    inner = inner_bound(d, eps, eps, n, parse_gamma_rule("logn", n))
    outer = outer_bound(d, eps, n)
    if not outer.valid:
        return True
    return (
        outer.r_min <= inner.r_min + 1e-12
        and outer.r_plus_r0_min <= inner.r_plus_r0_min + 1e-12
    )
