"""Optimal binary hypothesis tests and numerically checked converse chains.

The first half solves the classical randomized-test problem

    beta_alpha(p, q) = min { q(accept) : p(accept) >= alpha }

exactly for finite laws: outcomes are grouped by likelihood ratio, whole
tie groups are accepted in decreasing-ratio order, and the boundary group
is randomized so the p-acceptance hits alpha exactly.  ``beta_sandwich``
cross-checks the result against the two threshold-tail inequalities that
pin beta from both sides.

The second half builds concrete finite-blocklength witnesses for the
converse rate bounds.  A witness takes an iid pair law, moves a small
amount of mass between two support cells (the perturbation a coordination
code is allowed to introduce), and then walks the whole converse chain on
the exact perturbed law: candidate thresholds, the tail premises that
license them, the implied bounds on log(1/beta), and the final rate
expression.  Nothing is asymptotic; every tail and every inequality is
evaluated numerically, and steps whose premise fails are reported as
unlicensed rather than silently skipped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .binning import SchemeConfig, draw_binning, rc_joint
from .cltverify import AtomLaw, density_law
from .errors import CoordsimError, DomainError, ShapeError
from .measures import BEStats, gaussian_q_inv
from .probability import (
    DensityTable,
    JointPmf,
    Pmf,
    iid_extension,
    marginalize,
    regroup_pair,
)
from .region import Decomposition, stats_wu, stats_wuv

LLR_TIE_TOL = 1e-12  # ratios closer than this (in bits) share a tie group
PREMISE_TOL = 1e-12  # slack granted to tail premises
BOUND_TOL = 1e-10  # slack granted to conclusions

__all__ = [
    "BinaryTest",
    "NPResult",
    "SandwichReport",
    "CandidateCheck",
    "WitnessReport",
    "np_beta",
    "np_test",
    "beta_sandwich",
    "converse_witness",
    "rr0_converse_witness",
]


# =============================================================================
# input handling
# =============================================================================


def _flat_law(obj, what: str) -> np.ndarray:
    """Flatten a Pmf/JointPmf/array into a validated 1-D probability vector."""
    a = obj.probs if isinstance(obj, (Pmf, JointPmf)) else np.asarray(obj, dtype=np.float64)
    a = np.array(a, dtype=np.float64).reshape(-1)
    if a.size == 0:
        raise ShapeError(f"{what} must have at least one outcome")
    if np.any(~np.isfinite(a)) or np.any(a < 0):
        raise DomainError(f"{what} must be a nonnegative finite probability vector")
    total = float(a.sum())
    if abs(total - 1.0) > 1e-9:
        raise DomainError(f"{what} must sum to 1, got {total!r}")
    return a / total


def _check_alpha(alpha: float) -> float:
    if not (isinstance(alpha, (int, float)) and math.isfinite(alpha) and 0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie strictly inside (0, 1), got {alpha!r}")
    return float(alpha)


# =============================================================================
# optimal randomized tests
# =============================================================================


@dataclass(frozen=True)
class BinaryTest:
    """Randomized decision rule: per-outcome probability of accepting the
    first law.  Probabilities are clipped to [0, 1] after validation."""

    decision: np.ndarray

    def __post_init__(self):
        d = np.array(self.decision, dtype=np.float64, copy=True).reshape(-1)
        if d.size == 0:
            raise ShapeError("BinaryTest needs at least one outcome")
        if np.any(~np.isfinite(d)) or np.any(d < -1e-12) or np.any(d > 1.0 + 1e-12):
            raise DomainError("decision probabilities must lie in [0, 1]")
        d = np.clip(d, 0.0, 1.0)
        d.setflags(write=False)
        object.__setattr__(self, "decision", d)

    def accept_mass(self, law) -> float:
        """Probability of acceptance when outcomes follow ``law``."""
        a = _flat_law(law, "law")
        if a.shape != self.decision.shape:
            raise ShapeError(
                f"law has {a.shape[0]} outcomes, test has {self.decision.shape[0]}"
            )
        return float(np.dot(self.decision, a))


@dataclass(frozen=True)
class NPResult:
    """Minimum type-II mass with the boundary that achieves it.

    ``threshold`` is the log-likelihood ratio (bits) of the boundary tie
    group; outcomes with a strictly larger ratio are accepted outright and
    the boundary group is accepted with probability ``randomization``, so
    the acceptance mass under the first law equals alpha exactly.
    """

    beta: float
    threshold: float
    randomization: float

    def __post_init__(self):
        if not (-1e-12 <= self.beta <= 1.0 + 1e-12):
            raise DomainError(f"beta must lie in [0, 1], got {self.beta!r}")
        if not (-1e-12 <= self.randomization <= 1.0 + 1e-12):
            raise DomainError(f"randomization must lie in [0, 1], got {self.randomization!r}")
        if math.isnan(self.threshold):
            raise DomainError("threshold must not be NaN")


def _same_llr(a: float, b: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= LLR_TIE_TOL


def _llr_groups(p: np.ndarray, q: np.ndarray):
    """Tie groups of log2(p/q) over the p-support, in decreasing order.

    Returns a list of (llr, p_mass, q_mass, outcome_indices).  Outcomes
    with q = 0 form the leading +inf group; outcomes with p = 0 never
    appear (accepting them costs q-mass and buys nothing).
    """
    sup = np.flatnonzero(p > 0)
    with np.errstate(divide="ignore"):
        llr = np.log2(p[sup] / q[sup])
    order = np.argsort(-llr, kind="stable")
    lv = llr[order]
    groups = []
    start = 0
    for i in range(1, order.size + 1):
        if i == order.size or not _same_llr(float(lv[start]), float(lv[i])):
            idx = sup[order[start:i]]
            groups.append(
                (float(lv[start]), float(p[idx].sum()), float(q[idx].sum()), idx)
            )
            start = i
    return groups


def _np_solve(p: np.ndarray, q: np.ndarray, alpha: float):
    """Shared core: returns (NPResult, decision vector)."""
    groups = _llr_groups(p, q)
    decision = np.zeros(p.shape[0])
    beta = 0.0
    cum = 0.0
    for g_llr, gp, gq, idx in groups:
        remaining = alpha - cum
        if gp >= remaining:
            theta = remaining / gp
            beta += theta * gq
            decision[idx] = theta
            achieved = cum + theta * gp
            if abs(achieved - alpha) > PREMISE_TOL:
                raise CoordsimError(
                    f"acceptance mass {achieved!r} missed alpha {alpha!r}"
                )
            return NPResult(beta=float(beta), threshold=g_llr, randomization=float(theta)), decision
        beta += gq
        cum += gp
        decision[idx] = 1.0
    raise CoordsimError("total p-mass fell below alpha; law was not normalized")


def np_beta(p, q, alpha: float) -> NPResult:
    """Exact minimum type-II mass over randomized tests with p-acceptance
    at least alpha.

    Accepts Pmf/JointPmf or plain arrays of matching total size; both are
    flattened C-style.  alpha must lie strictly inside (0, 1).
    """
    alpha = _check_alpha(alpha)
    pa = _flat_law(p, "p")
    qa = _flat_law(q, "q")
    if pa.shape != qa.shape:
        raise ShapeError(f"p has {pa.shape[0]} outcomes, q has {qa.shape[0]}")
    result, _ = _np_solve(pa, qa, alpha)
    return result


def np_test(p, q, alpha: float) -> BinaryTest:
    """The optimal randomized decision rule behind ``np_beta``."""
    alpha = _check_alpha(alpha)
    pa = _flat_law(p, "p")
    qa = _flat_law(q, "q")
    if pa.shape != qa.shape:
        raise ShapeError(f"p has {pa.shape[0]} outcomes, q has {qa.shape[0]}")
    _, decision = _np_solve(pa, qa, alpha)
    return BinaryTest(decision)


# =============================================================================
# threshold-tail sandwich
# =============================================================================


@dataclass(frozen=True)
class SandwichReport:
    """Grid check of the two tail inequalities that sandwich beta.

    For every gamma in the grid, with P = P_p{log2(p/q) > log2 gamma}:

      * lower side:  alpha <= P + gamma * beta        (slack = rhs - alpha)
      * upper side:  beta <= 1/gamma whenever P >= alpha
                                                      (slack = 1/gamma - beta)

    Upper-side entries are None where the premise P >= alpha fails; the
    worst upper slack is +inf when no grid point qualifies.  ``ok`` means
    every evaluated slack is >= -1e-10.
    """

    alpha: float
    beta: float
    gammas: tuple
    lower_slacks: tuple
    upper_slacks: tuple
    worst_lower_slack: float
    worst_upper_slack: float
    n_upper_applicable: int
    ok: bool


def beta_sandwich(p, q, alpha: float, gamma_grid) -> SandwichReport:
    """Evaluate both threshold-tail inequalities on a grid of gammas."""
    alpha = _check_alpha(alpha)
    pa = _flat_law(p, "p")
    qa = _flat_law(q, "q")
    if pa.shape != qa.shape:
        raise ShapeError(f"p has {pa.shape[0]} outcomes, q has {qa.shape[0]}")
    gammas = np.asarray(list(gamma_grid), dtype=np.float64)
    if gammas.size == 0:
        raise DomainError("gamma grid must be non-empty")
    if np.any(~np.isfinite(gammas)) or np.any(gammas <= 0):
        raise DomainError("gamma grid entries must be finite and positive")

    groups = _llr_groups(pa, qa)
    g_llr = np.array([g[0] for g in groups])
    g_p = np.array([g[1] for g in groups])
    beta = _np_solve(pa, qa, alpha)[0].beta

    lower = []
    upper = []
    for gam in gammas:
        t = math.log2(gam)
        tail = float(g_p[g_llr > t].sum())
        lower.append(tail + gam * beta - alpha)
        upper.append(1.0 / gam - beta if tail >= alpha else None)

    applicable = [s for s in upper if s is not None]
    worst_upper = min(applicable) if applicable else math.inf
    worst_lower = min(lower)
    ok = worst_lower >= -BOUND_TOL and worst_upper >= -BOUND_TOL
    return SandwichReport(
        alpha=alpha,
        beta=beta,
        gammas=tuple(float(g) for g in gammas),
        lower_slacks=tuple(lower),
        upper_slacks=tuple(upper),
        worst_lower_slack=float(worst_lower),
        worst_upper_slack=float(worst_upper),
        n_upper_applicable=len(applicable),
        ok=ok,
    )


# =============================================================================
# two-cell mass transfer
# =============================================================================


@dataclass(frozen=True)
class _Transfer:
    """One mass move between two support cells of a pair law."""

    gainer: tuple
    loser: tuple
    delta: float
    corr_gain: float  # log2(1 + delta / P(gainer))
    corr_lose: float  # log2(P(loser) / (P(loser) - delta)); inf if emptied
    p_gainer: float
    p_loser: float
    same_row: bool


def _pick_transfer(P: np.ndarray, Q: np.ndarray, eps: float, perturb: str):
    """Choose the transfer cells and apply the move.

    The gainer is the support cell with the largest likelihood ratio
    (lowest flat index on ties); the loser is the smallest-ratio support
    cell taken from the gainer's row when that row holds another support
    cell, otherwise globally (highest flat index on ties).  The moved mass
    is eps times the perturbed cell's probability -- the gainer's for
    ``perturb="gain"``, the loser's for ``perturb="lose"`` -- capped so the
    loser never goes negative.
    """
    rows, cols = P.shape
    flat_p = P.reshape(-1)
    flat_q = Q.reshape(-1)
    sup = np.flatnonzero(flat_p > 0)
    if sup.size < 2:
        raise DomainError("mass transfer needs at least two support cells")
    vals = np.log2(flat_p[sup] / flat_q[sup])
    gi = int(sup[int(np.argmax(vals))])

    row_sup = sup[(sup // cols) == (gi // cols)]
    if row_sup.size >= 2:
        cand = row_sup[row_sup != gi]
        same_row = True
    else:
        cand = sup[sup != gi]
        same_row = False
    cvals = np.log2(flat_p[cand] / flat_q[cand])
    li = int(cand[cvals == cvals.min()].max())

    pert = gi if perturb == "gain" else li
    delta = min(eps * float(flat_p[pert]), float(flat_p[li]))

    out = flat_p.copy()
    out[gi] += delta
    out[li] -= delta
    if out[li] < 0.0:
        out[li] = 0.0

    p_g = float(flat_p[gi])
    p_l = float(flat_p[li])
    rem = p_l - delta
    info = _Transfer(
        gainer=tuple(int(x) for x in np.unravel_index(gi, P.shape)),
        loser=tuple(int(x) for x in np.unravel_index(li, P.shape)),
        delta=float(delta),
        corr_gain=math.log2(1.0 + delta / p_g),
        corr_lose=math.inf if rem <= 0.0 else math.log2(p_l / rem),
        p_gainer=p_g,
        p_loser=p_l,
        same_row=same_row,
    )
    return info, out.reshape(P.shape)


def _corr_range(P: np.ndarray, delta: float) -> dict:
    """Spread of the two threshold corrections across all support cells.

    The correction formulas depend on which cell the chain tracks; this
    reports how much that choice can move them for a fixed transfer size.
    Cells a ``lose`` correction would empty are excluded from its range
    (their correction is unbounded) and counted instead.
    """
    sup_vals = P[P > 0]
    gains = np.log2(1.0 + delta / sup_vals)
    keep = sup_vals > delta
    if np.any(keep):
        loses = np.log2(sup_vals[keep] / (sup_vals[keep] - delta))
        lose_min, lose_max = float(loses.min()), float(loses.max())
    else:
        lose_min = lose_max = math.inf
    return {
        "delta": float(delta),
        "gain_min": float(gains.min()),
        "gain_max": float(gains.max()),
        "lose_min": lose_min,
        "lose_max": lose_max,
        "lose_cells_excluded": int(np.count_nonzero(~keep)),
    }


# =============================================================================
# converse witnesses
# =============================================================================


@dataclass(frozen=True)
class CandidateCheck:
    """One candidate threshold in an assembled converse chain.

    ``premise_ok`` says whether the tail condition licensing the step
    holds; ``ok`` is the conclusion (None when the premise fails or beta
    is unavailable, since the step then asserts nothing).
    """

    name: str
    log_gamma: float
    tail: float
    premise_ok: bool
    bound_lhs: float
    bound_rhs: float
    ok: bool | None


@dataclass(frozen=True)
class WitnessReport:
    """Every intermediate quantity of one assembled converse chain.

    Upper-side candidates check  log2(1/beta) >= log_gamma  against the
    one-sided tail premise P{llr >= log_gamma} >= alpha.  Lower-side
    candidates check  log_gamma + gain - log2(log_arg) >= log2(1/beta)
    against the strict-tail premise P{llr > log_gamma} <= y + B/sqrt(n).
    ``rate`` is the final per-symbol bound implied by the chain, with the
    log term omitted (and ``valid_regime`` False) when its argument
    eps - y - 2B/sqrt(n) is nonpositive.
    """

    kind: str
    mode: str
    n: int
    eps: float
    y: float
    mu: float
    v: float
    b_over_sqrt_n: float
    alpha: float
    log_arg: float
    valid_regime: bool
    beta: float
    log2_inv_beta: float
    np_threshold: float
    np_randomization: float
    h_standin: float
    lower_gain: float
    rate_penalty: float
    rate: float
    upper: tuple
    lower: tuple
    upper_ok: bool
    lower_ok: bool
    l1_to_iid: float
    transfer: dict | None
    corr_range: dict | None


def _pair_llr_law(P2: np.ndarray, Q: np.ndarray) -> AtomLaw:
    """Exact law of log2(P2/Q) when cells are drawn from P2."""
    sup = P2 > 0
    if np.any(sup & (Q <= 0)):
        raise DomainError("perturbed law puts mass where the product law has none")
    vals = np.full(P2.shape, np.nan)
    vals[sup] = np.log2(P2[sup] / Q[sup])
    return density_law(DensityTable(vals, sup), JointPmf(P2))


def _assemble(
    kind: str,
    mode: str,
    P2: np.ndarray,
    Q: np.ndarray,
    n: int,
    eps: float,
    y: float,
    stats: BEStats,
    h_standin: float,
    shifts: dict,
    lower_gain: float,
    rate_penalty: float,
    l1_to_iid: float,
    transfer: dict | None,
    corr_range: dict | None,
) -> WitnessReport:
    b = stats.b_over_sqrt_n(n)
    alpha = eps - b
    log_arg = eps - y - 2.0 * b
    valid = log_arg > 0.0
    law = _pair_llr_law(P2, Q)

    if 0.0 < alpha < 1.0:
        res = np_beta(P2.reshape(-1), Q.reshape(-1), alpha)
        beta = res.beta
        log2_inv_beta = math.inf if beta <= 0.0 else -math.log2(beta)
        np_thr, np_rand = res.threshold, res.randomization
    else:
        beta = math.nan
        log2_inv_beta = math.nan
        np_thr = math.nan
        np_rand = math.nan
    have_beta = not math.isnan(beta)

    candidates = list(shifts.items()) + [("zero", 0.0)]
    gauss_n = 0.0 if stats.degenerate else gaussian_q_inv(eps) * math.sqrt(n * stats.v)
    zero_up = n * stats.mu + gauss_n

    upper = []
    for name, shift in candidates:
        lg0 = zero_up + shift
        tail = law.tail_ge(lg0)
        premise = tail >= alpha - PREMISE_TOL
        ok = (log2_inv_beta >= lg0 - BOUND_TOL) if (premise and have_beta) else None
        upper.append(
            CandidateCheck(
                name=name,
                log_gamma=float(lg0),
                tail=float(tail),
                premise_ok=bool(premise),
                bound_lhs=float(log2_inv_beta),
                bound_rhs=float(lg0),
                ok=ok,
            )
        )

    budget = y + b
    lower = []
    for name, shift in candidates:
        lgam = h_standin + shift
        tail = law.tail_gt(lgam)
        premise = tail <= budget + PREMISE_TOL
        lhs = lgam + lower_gain - math.log2(log_arg) if valid else math.nan
        ok = (lhs >= log2_inv_beta - BOUND_TOL) if (premise and valid and have_beta) else None
        lower.append(
            CandidateCheck(
                name=name,
                log_gamma=float(lgam),
                tail=float(tail),
                premise_ok=bool(premise),
                bound_lhs=float(lhs),
                bound_rhs=float(log2_inv_beta),
                ok=ok,
            )
        )

    rate = stats.mu + (0.0 if stats.degenerate else gaussian_q_inv(eps) * math.sqrt(stats.v / n))
    if valid:
        rate += math.log2(log_arg) / n
    rate -= rate_penalty

    return WitnessReport(
        kind=kind,
        mode=mode,
        n=n,
        eps=eps,
        y=y,
        mu=stats.mu,
        v=stats.v,
        b_over_sqrt_n=b,
        alpha=alpha,
        log_arg=log_arg,
        valid_regime=valid,
        beta=beta,
        log2_inv_beta=log2_inv_beta,
        np_threshold=np_thr,
        np_randomization=np_rand,
        h_standin=h_standin,
        lower_gain=lower_gain,
        rate_penalty=rate_penalty,
        rate=rate,
        upper=tuple(upper),
        lower=tuple(lower),
        upper_ok=any(c.ok is True for c in upper),
        lower_ok=any(c.ok is True for c in lower),
        l1_to_iid=l1_to_iid,
        transfer=transfer,
        corr_range=corr_range,
    )


def _check_witness_params(n: int, eps: float, y: float) -> None:
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise DomainError(f"blocklength must be an integer >= 1, got {n!r}")
    if not (isinstance(eps, (int, float)) and 0.0 < eps < 1.0):
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")
    if not (isinstance(y, (int, float)) and 0.5 < y < 1.0):
        raise DomainError(f"split parameter y must lie in (0.5, 1), got {y!r}")


def converse_witness(d: Decomposition, n: int, eps: float, y: float, mode: str) -> WitnessReport:
    """Assemble and check the message-rate converse chain on one instance.

    The pair law is (U^n, W^n) under the iid target; the alternative is
    the product of its marginals, so the ratio statistic is the n-fold
    information density.  Modes:

      * ``case1``: the transferred mass is sized from the gaining cell and
        the candidate thresholds carry the +log2(1 + delta/P) correction;
      * ``case2``: sized from the losing cell, corrections enter with a
        minus sign as log2(P/(P - delta));
      * ``coded``: no hand perturbation -- the pair law is the exact output
        of a deterministic binning scheme, and only the uncorrected
        thresholds are checked.

    Both perturbed cases report the correction's spread across every
    admissible cell choice, as a sensitivity band for the chain.
    """
    if mode not in ("case1", "case2", "coded"):
        raise DomainError(f"mode must be one of case1/case2/coded, got {mode!r}")
    _check_witness_params(n, eps, y)

    pair = marginalize(d.joint(), ("u", "w"))
    stats = stats_wu(d)
    P = iid_extension(pair, n).probs
    pu_n = iid_extension(marginalize(pair, "u"), n).probs
    pw_n = iid_extension(marginalize(pair, "w"), n).probs
    Q = np.outer(pu_n, pw_n)

    if mode == "coded":
        cfg = SchemeConfig(
            n=n,
            rate_r=math.log2(d.w_size) if d.w_size > 1 else 1.0,
            rate_r0=1.0 / n,
            rate_rtilde=1.0 / n,
            seed=0,
            decomposition=d,
        )
        realization = draw_binning(cfg, 0)
        P2 = rc_joint(d, realization, cfg).marginal(("u", "w")).probs
        shifts = {}
        transfer = None
        corr_range = None
        l1 = float(np.abs(P2 - P).sum())
    else:
        info, P2 = _pick_transfer(P, Q, eps, "gain" if mode == "case1" else "lose")
        shifts = (
            {"corrected": info.corr_gain}
            if mode == "case1"
            else {"corrected": -info.corr_lose}
        )
        transfer = {
            "gainer": info.gainer,
            "loser": info.loser,
            "delta": info.delta,
            "corr_gain": info.corr_gain,
            "corr_lose": info.corr_lose,
            "p_gainer": info.p_gainer,
            "p_loser": info.p_loser,
            "same_row": info.same_row,
        }
        corr_range = _corr_range(P, info.delta)
        l1 = float(np.abs(P2 - P).sum())

    return _assemble(
        kind="rate",
        mode=mode,
        P2=P2,
        Q=Q,
        n=n,
        eps=eps,
        y=y,
        stats=stats,
        h_standin=n * stats.mu,
        shifts=shifts,
        lower_gain=0.0,
        rate_penalty=0.0,
        l1_to_iid=l1,
        transfer=transfer,
        corr_range=corr_range,
    )


def rr0_converse_witness(d: Decomposition, n: int, eps: float, y: float) -> WitnessReport:
    """Assemble and check the sum-rate converse chain on one instance.

    The pair law is ((U, V)^n, W^n) and the alternative is the product of
    the iid pair marginal and the iid W marginal.  The lower-side
    thresholds sit at the entropy stand-in n*I (the first-order value of
    the code entropy the chain tracks); converting that entropy to a sum
    rate costs at most 2 n g(eps) with
    g(eps) = 2 eps (log2|UxV| + log2(1/eps)), so that slack enters the
    lower inequality's left side and the final rate subtracts 2 g(eps)
    per symbol.  The perturbation is sized from the gaining cell.
    """
    _check_witness_params(n, eps, y)

    pair = regroup_pair(d.joint(), ("u", "v"), "w")
    stats = stats_wuv(d)
    P = iid_extension(pair, n).probs
    puv_n = iid_extension(marginalize(pair, 0), n).probs
    pw_n = iid_extension(marginalize(pair, 1), n).probs
    Q = np.outer(puv_n, pw_n)

    info, P2 = _pick_transfer(P, Q, eps, "gain")
    transfer = {
        "gainer": info.gainer,
        "loser": info.loser,
        "delta": info.delta,
        "corr_gain": info.corr_gain,
        "corr_lose": info.corr_lose,
        "p_gainer": info.p_gainer,
        "p_loser": info.p_loser,
        "same_row": info.same_row,
    }
    g_eps = 2.0 * eps * (math.log2(d.u_size * d.v_size) + math.log2(1.0 / eps))

    return _assemble(
        kind="sum-rate",
        mode="case1",
        P2=P2,
        Q=Q,
        n=n,
        eps=eps,
        y=y,
        stats=stats,
        h_standin=n * stats.mu,
        shifts={"corrected": info.corr_gain},
        lower_gain=2.0 * n * g_eps,
        rate_penalty=2.0 * g_eps,
        l1_to_iid=float(np.abs(P2 - P).sum()),
        transfer=transfer,
        corr_range=_corr_range(P, info.delta),
    )
