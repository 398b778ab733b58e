"""Exact small-blocklength realization of the random-binning coordination
scheme, plus the one-shot binning lemmas it is built from.

The scheme
----------
Fix a decomposition U - W - V and a blocklength n.  Three independent
uniform binnings of the W-sequence space are drawn:

* phi_c -> C   (common randomness,   floor(2^(n R0)) bins)
* phi_m -> M   (message,             floor(2^(n R))  bins)
* phi_f -> F   (extra shared seed,   floor(2^(n Rt)) bins)

Two joint laws matter.  P^RB ("reverse" direction) draws (U^n, W^n) iid
from the chain and reads the bin indices off W^n; its (U,W,V) marginal is
the iid chain *exactly*.  P^RC (the operational protocol) draws F, C
uniformly, synthesizes W^n from the encoder conditional P^RB(w | f, c, u),
transmits M = phi_m(W^n), reconstructs What^n with the mismatch stochastic
likelihood coder over the triple bin, and emits V^n from What^n.  Good
coordination means the (U^n, V^n) marginal of P^RC is L1-close to the iid
target, and the analysis prices that through three exact tail terms
(eps_app / eps_dec / eps_app2) combined into eps_tot.

Everything here is exact per realization: joints are held factored (iid
tables plus bin maps) and only requested marginals are materialized, so
the memory cost is the size of what you ask for, never the seven-axis
product.

Conventions
-----------
Sequences index their composite axis first-symbol-most-significant.  The
fallback sequence w0 is flat index 0 (the lexicographically smallest).
Fallbacks: an encoder conditional with no mass falls back to the reference
restricted to the bin; if the bin carries no reference mass at all the
encoder emits w0 and the path counts as an abort.  A decoder triple bin
with no reference mass likewise outputs w0 and aborts.  RNG is the
counter-based Philox generator; trial t of a config with seed s uses key
s XOR t, so trials are reproducible individually and in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cltverify import AtomLaw, convolve_n, density_law
from .errors import DomainError, ResourceLimitError, ShapeError
from .probability import (
    ConditionalPmf,
    DensityTable,
    JointPmf,
    Pmf,
    check_table_size,
    iid_extension,
    marginalize,
    regroup_pair,
    sequence_digits,
)
from .region import Decomposition, GammaTriple, parse_gamma_rule

W_FALLBACK = 0  # flat index of the lexicographically smallest sequence

# =============================================================================
# configuration
# =============================================================================


def _bin_count(rate: float, n: int, what: str) -> int:
    """floor(2^(n*rate)) with snapping against float dust, at least 1."""
    if rate < 0 or not math.isfinite(rate):
        raise DomainError(f"{what} must be a finite nonnegative rate, got {rate!r}")
    exponent = n * rate
    if exponent > 60:
        raise ResourceLimitError(
            f"{what}: 2^({n}*{rate}) bins exceed the 62-bit index range",
            required=2 ** 62,
        )
    raw = 2.0 ** exponent
    snapped = round(raw)
    if abs(raw - snapped) < 1e-6:
        return max(1, int(snapped))
    return max(1, int(math.floor(raw)))


@dataclass(frozen=True)
class SchemeConfig:
    """Blocklength, rates, seed, and the decomposition a scheme runs on.

    Bin counts are floor(2^(n*rate)), clamped to >= 1; `effective_rates`
    reports log2(bins)/n, which differs from the nominal rates whenever
    rounding bites.
    """

    n: int
    rate_r: float
    rate_r0: float
    rate_rtilde: float
    seed: int
    decomposition: Decomposition

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"blocklength must be >= 1, got {self.n}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64):
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        # materialize the counts now so bad rates fail at construction
        self.bin_counts()

    def bin_counts(self) -> tuple[int, int, int]:
        """(bins_f, bins_c, bins_m) for the (Rt, R0, R) rates."""
        bf = _bin_count(self.rate_rtilde, self.n, "rate_rtilde")
        bc = _bin_count(self.rate_r0, self.n, "rate_r0")
        bm = _bin_count(self.rate_r, self.n, "rate_r")
        if math.log2(bf) + math.log2(bc) + math.log2(bm) > 62:
            raise ResourceLimitError("combined bin indices exceed the 62-bit range", required=2 ** 62)
        return bf, bc, bm

    def effective_rates(self) -> tuple[float, float, float]:
        """(R, R0, Rt) actually realized after integer rounding."""
        bf, bc, bm = self.bin_counts()
        return (math.log2(bm) / self.n, math.log2(bc) / self.n, math.log2(bf) / self.n)


@dataclass(frozen=True)
class BinningRealization:
    """One drawn triple of total bin maps over the W-sequence space.

    Carries the reference iid W^n mass so the stochastic likelihood coder
    is self-contained; total-map validity is enforced at construction.
    """

    phi_f: np.ndarray
    phi_c: np.ndarray
    phi_m: np.ndarray
    bins_f: int
    bins_c: int
    bins_m: int
    w_mass: np.ndarray

    def __post_init__(self):
        for name, arr, bins in (
            ("phi_f", self.phi_f, self.bins_f),
            ("phi_c", self.phi_c, self.bins_c),
            ("phi_m", self.phi_m, self.bins_m),
        ):
            a = np.array(arr, dtype=np.int64, copy=True)
            if a.ndim != 1 or a.shape[0] != self.phi_f.shape[0] or a.shape[0] == 0:
                raise ShapeError(f"{name} must be a non-empty 1-D map over W^n")
            if a.min() < 0 or a.max() >= bins:
                raise DomainError(f"{name} has an image outside [0, {bins})")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        w = np.array(self.w_mass, dtype=np.float64, copy=True)
        if w.shape != self.phi_f.shape:
            raise ShapeError("w_mass must align with the bin maps")
        w.setflags(write=False)
        object.__setattr__(self, "w_mass", w)

    @property
    def n_sequences(self) -> int:
        return self.phi_f.shape[0]

    def triple_members(self, f: int, c: int, m: int) -> np.ndarray:
        """Flat indices of the sequences binned to (f, c, m)."""
        if not (0 <= f < self.bins_f and 0 <= c < self.bins_c and 0 <= m < self.bins_m):
            raise DomainError(f"bin triple ({f},{c},{m}) out of range")
        return np.where((self.phi_f == f) & (self.phi_c == c) & (self.phi_m == m))[0]


def draw_binning(cfg: SchemeConfig, trial: int = 0) -> BinningRealization:
    """Draw the three independent uniform bin maps for trial ``trial``.

    Uses Philox with key seed XOR trial: each trial is its own stream, so
    realizations are reproducible no matter how trials are scheduled.
    """
    if trial < 0:
        raise DomainError(f"trial index must be >= 0, got {trial}")
    d = cfg.decomposition
    n_w = d.w_size ** cfg.n
    check_table_size(n_w, "binning map")
    bf, bc, bm = cfg.bin_counts()
    rng = np.random.Generator(np.random.Philox(key=cfg.seed ^ trial))
    phi_f = rng.integers(0, bf, size=n_w, dtype=np.int64)
    phi_c = rng.integers(0, bc, size=n_w, dtype=np.int64)
    phi_m = rng.integers(0, bm, size=n_w, dtype=np.int64)
    w_mass = iid_extension(_w_marginal(d), cfg.n).probs
    return BinningRealization(
        phi_f=phi_f, phi_c=phi_c, phi_m=phi_m,
        bins_f=bf, bins_c=bc, bins_m=bm, w_mass=w_mass,
    )


def _w_marginal(d: Decomposition) -> Pmf:
    return marginalize(d.joint(), "w")


def slc_posterior(b: BinningRealization, f: int, c: int, m: int) -> tuple[Pmf, bool]:
    """Decoder posterior over W^n for bin triple (f, c, m): the reference
    mass restricted to the triple bin, renormalized.

    Returns (pmf, aborted).  A triple bin that is empty or carries zero
    reference mass cannot be renormalized: the decoder outputs the fixed
    fallback sequence w0 and the abort flag is set.
    """
    members = b.triple_members(f, c, m)
    out = np.zeros(b.n_sequences)
    mass = b.w_mass[members]
    total = float(mass.sum())
    if members.size == 0 or total <= 0.0:
        out[W_FALLBACK] = 1.0
        return Pmf(out), True
    out[members] = mass / total
    return Pmf(out), False


# =============================================================================
# factored scheme tables
# =============================================================================


@dataclass(frozen=True)
class _Tables:
    """iid blocks shared by every per-realization computation."""

    n_u: int
    n_w: int
    n_v: int
    pu: np.ndarray        # (n_u,)
    puw: np.ndarray       # (n_u, n_w) joint
    pw: np.ndarray        # (n_w,)
    pvn: np.ndarray       # (n_w, n_v) kernel rows
    target_uv: np.ndarray  # (n_u, n_v) iid target


def _tables(d: Decomposition, n: int) -> _Tables:
    joint = d.joint()
    n_u, n_w, n_v = d.u_size ** n, d.w_size ** n, d.v_size ** n
    check_table_size(max(n_u * n_w, n_w * n_v, n_u * n_v), "scheme tables")
    puw = iid_extension(regroup_pair(marginalize(joint, ("u", "w")), "u", "w"), n).probs
    pvn = iid_extension(d.v_given_w, n).rows
    target = iid_extension(regroup_pair(marginalize(joint, ("u", "v")), "u", "v"), n).probs
    return _Tables(
        n_u=n_u, n_w=n_w, n_v=n_v,
        pu=puw.sum(axis=1), puw=puw, pw=puw.sum(axis=0), pvn=pvn, target_uv=target,
    )


def _fc_key(b: BinningRealization) -> np.ndarray:
    return b.phi_f * b.bins_c + b.phi_c


@dataclass
class _KeyPath:
    """Encoder/decoder data for one realized (f, c) bin pair."""

    key: int
    members: np.ndarray       # flat w indices
    enc: np.ndarray           # (n_u, |members|) encoder conditional
    w0_enc_mass: np.ndarray   # (n_u,) mass routed to the w0 encoder fallback
    vrows: np.ndarray         # (|members|, n_v): decoded-V law per member
    path_uv: np.ndarray       # (n_u, n_v) joint of the path, weight 1


def _key_paths(tab: _Tables, b: BinningRealization) -> tuple[list[_KeyPath], np.ndarray]:
    """Per-hit-key path tables plus the (f,c)-key array."""
    key = _fc_key(b)
    uniq, inv = np.unique(key, return_inverse=True)
    paths: list[_KeyPath] = []
    for j, kv in enumerate(uniq):
        members = np.where(inv == j)[0]
        encw = tab.puw[:, members]
        z_u = encw.sum(axis=1)
        enc = np.zeros_like(encw)
        pos = z_u > 0
        enc[pos] = encw[pos] / z_u[pos, None]
        w0_mass = np.zeros(tab.n_u)
        if (~pos).any():
            bin_mass = tab.pw[members]
            total = float(bin_mass.sum())
            if total > 0:
                enc[~pos] = bin_mass / total
            else:
                w0_mass[~pos] = tab.pu[~pos]
        m_vals = b.phi_m[members]
        vrows = np.empty((members.size, tab.n_v))
        for mv in np.unique(m_vals):
            sel = m_vals == mv
            t_mass = tab.pw[members[sel]]
            z_t = float(t_mass.sum())
            if z_t > 0:
                vrows[sel] = (t_mass / z_t) @ tab.pvn[members[sel]]
            else:
                vrows[sel] = tab.pvn[W_FALLBACK]
        path = (tab.pu[:, None] * enc) @ vrows
        path += w0_mass[:, None] * tab.pvn[W_FALLBACK][None, :]
        paths.append(_KeyPath(key=int(kv), members=members, enc=enc,
                              w0_enc_mass=w0_mass, vrows=vrows, path_uv=path))
    return paths, key


# =============================================================================
# per-realization metrics
# =============================================================================


@dataclass(frozen=True)
class TrialMetrics:
    """Exact per-realization quantities of one drawn binning."""

    l1_uv: float
    l1_uv_given_f: float
    select_f_index: int
    select_f_distance: float
    l1_index_fc: float
    decoder_error: float
    abort_rate: float


def _trial_metrics(tab: _Tables, b: BinningRealization) -> TrialMetrics:
    n_keys_total = b.bins_f * b.bins_c
    paths, key = _key_paths(tab, b)

    # --- uniformity surface: realized (U^n, F, C) vs ideal product --------
    l1_index = 0.0
    for p in paths:
        rb_col = tab.puw[:, p.members].sum(axis=1)
        l1_index += float(np.abs(rb_col - tab.pu / n_keys_total).sum())
    l1_index += (n_keys_total - len(paths)) / n_keys_total  # unhit ideal mass

    # --- decoder error under the reverse joint ----------------------------
    triple = key * b.bins_m + b.phi_m
    t_uniq, t_inv = np.unique(triple, return_inverse=True)
    z = np.zeros(t_uniq.size)
    np.add.at(z, t_inv, tab.pw)
    z_per_w = z[t_inv]
    ok = z_per_w > 0
    decoder_error = 1.0 - float(np.sum(tab.pw[ok] ** 2 / z_per_w[ok]))

    # --- protocol joint on (U^n, V^n) --------------------------------------
    q = 1.0 / n_keys_total
    rc_uv = np.zeros((tab.n_u, tab.n_v))
    abort = (n_keys_total - len(paths)) * q  # unhit (f,c): encoder+decoder fallback
    for p in paths:
        rc_uv += q * p.path_uv
        abort += q * float(p.w0_enc_mass.sum())
    lump = np.outer(tab.pu, tab.pvn[W_FALLBACK])
    rc_uv += (n_keys_total - len(paths)) * q * lump
    l1_uv = float(np.abs(rc_uv - tab.target_uv).sum())

    # --- seed selection -----------------------------------------------------
    by_f: dict[int, list[_KeyPath]] = {}
    for p in paths:
        by_f.setdefault(p.key // b.bins_c, []).append(p)
    best_f, best_dist, best_cond_rc = -1, math.inf, None
    for f_val in sorted(by_f):
        group = by_f[f_val]
        members = np.concatenate([p.members for p in group])
        rb_mass = float(tab.pw[members].sum())
        if rb_mass <= 0.0:
            continue
        rb_fuv = tab.puw[:, members] @ tab.pvn[members]
        cond_rb = rb_fuv / rb_mass
        rc_f = sum(q * p.path_uv for p in group)
        rc_f = rc_f + (b.bins_c - len(group)) * q * lump
        cond_rc = rc_f * b.bins_f
        dist = float(np.abs(cond_rb - cond_rc).sum())
        if dist < best_dist - 1e-15:
            best_f, best_dist, best_cond_rc = f_val, dist, cond_rc
    if best_f < 0:  # unreachable for normalized laws; belt for degenerate input
        best_f, best_dist, best_cond_rc = 0, 2.0, lump
    l1_sel = float(np.abs(best_cond_rc - tab.target_uv).sum())

    return TrialMetrics(
        l1_uv=l1_uv,
        l1_uv_given_f=l1_sel,
        select_f_index=best_f,
        select_f_distance=best_dist,
        l1_index_fc=l1_index,
        decoder_error=decoder_error,
        abort_rate=abort,
    )


def select_f(d: Decomposition, b: BinningRealization, cfg: SchemeConfig) -> tuple[int, float]:
    """The extra-seed value whose conditional protocol law best matches the
    conditional reverse law, with its L1 distance.

    Only seeds carrying reverse-joint mass are scanned (others have no
    defined conditional); ties go to the smallest index.  The distance is
    at most twice the joint-with-F L1 -- a guarantee that is sharp when
    every F bin is hit and slack (but still true) when most bins are empty.
    """
    tab = _tables(d, cfg.n)
    m = _trial_metrics(tab, b)
    return m.select_f_index, m.select_f_distance


def trial_metrics(d: Decomposition, cfg: SchemeConfig, trial: int) -> TrialMetrics:
    """Exact metrics of one numbered draw -- the same draw the Monte Carlo
    loop uses for that trial index, so traces and aggregates agree."""
    b = draw_binning(cfg, trial=trial)
    return _trial_metrics(_tables(d, cfg.n), b)


# =============================================================================
# lazy factored joints
# =============================================================================

_RB_AXES = ("u", "w", "f", "c", "m", "hw", "v")


class RbJoint:
    """Factored reverse joint: (U^n, W^n) iid, bins read off W^n, the
    decoder posterior on the triple, V^n from the true W^n.

    ``marginal(axes)`` materializes exactly the requested axes (any subset
    of u, w, f, c, m, hw, v in any order), capped by the memory budget.
    """

    def __init__(self, d: Decomposition, b: BinningRealization, cfg: SchemeConfig):
        self.d, self.b, self.cfg = d, b, cfg
        self.tab = _tables(d, cfg.n)
        self._post_cache: dict[int, np.ndarray] = {}

    def _sizes(self) -> dict[str, int]:
        t, b = self.tab, self.b
        return {"u": t.n_u, "w": t.n_w, "f": b.bins_f, "c": b.bins_c,
                "m": b.bins_m, "hw": t.n_w, "v": t.n_v}

    def _posterior(self, w: int) -> np.ndarray:
        b = self.b
        trip = int((b.phi_f[w] * b.bins_c + b.phi_c[w]) * b.bins_m + b.phi_m[w])
        post = self._post_cache.get(trip)
        if post is None:
            pmf, _ = slc_posterior(b, int(b.phi_f[w]), int(b.phi_c[w]), int(b.phi_m[w]))
            post = pmf.probs
            self._post_cache[trip] = post
        return post

    def marginal(self, axes) -> JointPmf:
        axes = _check_axes(axes, _RB_AXES)
        sizes = self._sizes()
        shape = tuple(sizes[a] for a in axes)
        check_table_size(int(np.prod(shape)), "rb marginal")
        out = np.zeros(shape)
        t, b = self.tab, self.b
        for w in range(t.n_w):
            if t.pw[w] <= 0:  # zero-mass sequence contributes nothing
                continue
            factors, scalar = [], 1.0
            index: list = []
            for a in axes:
                if a == "u":
                    factors.append(t.puw[:, w]); index.append(slice(None))
                elif a == "w":
                    index.append(w)
                elif a == "f":
                    index.append(int(b.phi_f[w]))
                elif a == "c":
                    index.append(int(b.phi_c[w]))
                elif a == "m":
                    index.append(int(b.phi_m[w]))
                elif a == "hw":
                    factors.append(self._posterior(w)); index.append(slice(None))
                elif a == "v":
                    factors.append(t.pvn[w]); index.append(slice(None))
            if "u" not in axes:
                scalar = float(t.pw[w])
            block = scalar
            for vec in factors:
                block = np.multiply.outer(block, vec)
            out[tuple(index)] += block
        return JointPmf(out, axes=axes)


class RcJoint:
    """Factored protocol joint: uniform (F, C), encoder synthesis of W^n,
    the message bin, the decoder posterior, V^n from the reconstruction."""

    def __init__(self, d: Decomposition, b: BinningRealization, cfg: SchemeConfig):
        self.d, self.b, self.cfg = d, b, cfg
        self.tab = _tables(d, cfg.n)
        self._paths, _ = _key_paths(self.tab, b)
        self._by_key = {p.key: p for p in self._paths}

    _AXES = ("u", "f", "c", "w", "m", "hw", "v")

    def _sizes(self) -> dict[str, int]:
        t, b = self.tab, self.b
        return {"u": t.n_u, "w": t.n_w, "f": b.bins_f, "c": b.bins_c,
                "m": b.bins_m, "hw": t.n_w, "v": t.n_v}

    def _triple_posterior(self, members: np.ndarray, m_val: int) -> np.ndarray:
        t, b = self.tab, self.b
        sel = members[b.phi_m[members] == m_val]
        out = np.zeros(t.n_w)
        mass = t.pw[sel]
        total = float(mass.sum())
        if sel.size == 0 or total <= 0:
            out[W_FALLBACK] = 1.0
        else:
            out[sel] = mass / total
        return out

    def marginal(self, axes) -> JointPmf:
        requested = _check_axes(axes, self._AXES)
        # build internally in canonical order (hw and v adjacent, so their
        # coupled rank-2 block drops in as consecutive axes), transpose last
        canon = tuple(a for a in self._AXES if a in requested)
        sizes = self._sizes()
        shape = tuple(sizes[a] for a in canon)
        check_table_size(int(np.prod(shape)), "rc marginal")
        n_keys = self.b.bins_f * self.b.bins_c
        if n_keys > 1 << 20:
            raise ResourceLimitError(
                f"rc marginal enumerates {n_keys} (f,c) pairs; too many to iterate",
                required=n_keys,
            )
        out = np.zeros(shape)
        t, b = self.tab, self.b
        q = 1.0 / n_keys
        empty_members = np.empty(0, dtype=np.int64)
        for key in range(n_keys):
            f_val, c_val = divmod(key, b.bins_c)
            p = self._by_key.get(key)
            if p is None:
                u_vec = t.pu * q
                self._emit(out, canon, u_vec, f_val, c_val, W_FALLBACK,
                           int(b.phi_m[W_FALLBACK]), empty_members)
                continue
            for pos, w in enumerate(p.members):
                u_vec = t.pu * p.enc[:, pos] * q
                if not u_vec.any():
                    continue
                self._emit(out, canon, u_vec, f_val, c_val, int(w),
                           int(b.phi_m[w]), p.members)
            if p.w0_enc_mass.any():
                u_vec = p.w0_enc_mass * q
                self._emit(out, canon, u_vec, f_val, c_val, W_FALLBACK,
                           int(b.phi_m[W_FALLBACK]), p.members)
        perm = tuple(canon.index(a) for a in requested)
        return JointPmf(np.transpose(out, perm), axes=requested)

    def _emit(self, out, canon, u_vec, f_val, c_val, w, m_val, triple_base) -> None:
        """Accumulate one encoder path: W^n = w, bins fixed, decoder over
        the triple (f,c,m) restricted to ``triple_base``.  ``canon`` must
        list hw before v when both are present."""
        post = None
        if "hw" in canon or "v" in canon:
            post = self._triple_posterior(triple_base, m_val)
        coupled = "hw" in canon and "v" in canon
        index: list = []
        pieces: list[np.ndarray] = []
        for a in canon:
            if a == "u":
                index.append(slice(None))
                pieces.append(u_vec)
            elif a == "f":
                index.append(f_val)
            elif a == "c":
                index.append(c_val)
            elif a == "w":
                index.append(w)
            elif a == "m":
                index.append(m_val)
            elif a == "hw":
                index.append(slice(None))
                pieces.append(post[:, None] * self.tab.pvn if coupled else post)
            elif a == "v":
                index.append(slice(None))
                if not coupled:  # hw absent: V law is the posterior pushforward
                    pieces.append(post @ self.tab.pvn)
        block = np.array(1.0 if "u" in canon else float(u_vec.sum()))
        for piece in pieces:
            block = np.multiply.outer(block, piece)
        out[tuple(index)] += block


def _check_axes(axes, allowed) -> tuple[str, ...]:
    if isinstance(axes, str):
        axes = (axes,)
    axes = tuple(axes)
    if not axes or len(set(axes)) != len(axes):
        raise ShapeError(f"marginal axes must be a non-empty set, got {axes}")
    for a in axes:
        if a not in allowed:
            raise ShapeError(f"unknown axis {a!r}; valid axes are {allowed}")
    return axes


def rb_joint(d: Decomposition, b: BinningRealization, cfg: SchemeConfig) -> RbJoint:
    """Factored reverse joint; call .marginal(axes) for exact tables."""
    return RbJoint(d, b, cfg)


def rc_joint(d: Decomposition, b: BinningRealization, cfg: SchemeConfig) -> RcJoint:
    """Factored protocol joint; call .marginal(axes) for exact tables."""
    return RcJoint(d, b, cfg)


# =============================================================================
# exact error-term evaluation
# =============================================================================


def _entropy_density_law(values: np.ndarray, weights: np.ndarray) -> AtomLaw:
    """Pushforward AtomLaw of per-symbol density ``values`` under ``weights``."""
    support = np.isfinite(values)
    table = DensityTable(np.where(support, values, np.nan), support)
    flat_w = weights / weights.sum()
    return density_law(table, JointPmf(flat_w))


def epsilon_terms(
    d: Decomposition, cfg: SchemeConfig, g: GammaTriple
) -> tuple[float, float, float, float]:
    """The three exact tail terms and their total, at the *effective*
    (post-rounding) rates.

    eps_app  prices how far the (F, C) indices are from uniform-and-
             independent-of-U^n under the reverse joint;
    eps_dec  prices the triple-bin decoder's error;
    eps_app2 prices how far F is from independent of (U^n, V^n);
    eps_tot = 2 (eps_app2 + eps_app + 5 eps_dec).

    Each tail probability is an exact n-fold convolution of the per-symbol
    entropy-density law -- identical to summing the set indicator over the
    iid chain, just grouped by density value.
    """
    bf, bc, bm = cfg.bin_counts()
    n = cfg.n
    joint = d.joint()
    # per-symbol laws of h(w|u), h(w), h(w|u,v)
    uw = marginalize(joint, ("u", "w"))
    with np.errstate(divide="ignore"):
        h_w_given_u = -np.log2(d.w_given_u.rows)  # (u, w), +inf off support
    law1 = _entropy_density_law(
        np.where(uw.probs > 0, h_w_given_u, np.nan), uw.probs
    )
    p_w = _w_marginal(d)
    law2 = _entropy_density_law(
        np.where(p_w.probs > 0, -np.log2(np.where(p_w.probs > 0, p_w.probs, 1.0)), np.nan),
        p_w.probs,
    )
    puwv = joint.probs  # (u, w, v)
    puv = puwv.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        h_w_given_uv = -np.log2(puwv / puv[:, None, :])
    law3 = _entropy_density_law(np.where(puwv > 0, h_w_given_uv, np.nan), puwv)

    sum1 = convolve_n(law1, n)
    sum2 = convolve_n(law2, n)
    sum3 = convolve_n(law3, n)
    t1 = math.log2(bf) + math.log2(bc) + g.g1
    t2 = math.log2(bf) + math.log2(bc) + math.log2(bm) - g.g2
    t3 = math.log2(bf) + g.g3
    eps_app = (1.0 - sum1.tail_gt(t1)) + 2.0 ** (-(g.g1 + 1.0) / 2.0)
    eps_dec = sum2.tail_ge(t2) + 2.0 ** (-g.g2)
    eps_app2 = (1.0 - sum3.tail_gt(t3)) + 2.0 ** (-(g.g3 + 1.0) / 2.0)
    eps_tot = 2.0 * (eps_app2 + eps_app + 5.0 * eps_dec)
    return eps_app, eps_dec, eps_app2, eps_tot


# =============================================================================
# Monte Carlo over binning draws
# =============================================================================


@dataclass(frozen=True)
class SimReport:
    """Aggregated exact metrics over independent binning realizations.

    l1_uv            mean L1 of the protocol (U^n,V^n) law vs the iid target
    l1_uv_given_f    mean L1 of the selected-seed conditional vs the target
    l1_uv_given_f_min   best single realization (the per-code reading)
    l1_index_fc      mean L1 of the (U^n,F,C) surface vs the ideal product
    select_f_distance   mean conditional reverse-vs-protocol L1 at the
                        selected seed
    decoder_error    mean triple-bin decoder error under the reverse joint
    abort_rate       mean protocol mass through a w0 fallback
    ci95             95% half-width for l1_uv_given_f; ci95_by_metric has
                     the rest
    """

    l1_uv: float
    l1_uv_given_f: float
    eps_app: float
    eps_dec: float
    eps_app2: float
    eps_tot: float
    decoder_error: float
    abort_rate: float
    trials: int
    seed: int
    ci95: float
    l1_uv_given_f_min: float
    l1_index_fc: float
    select_f_distance: float
    effective_rates: tuple[float, float, float]
    ci95_by_metric: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("l1_uv", "l1_uv_given_f", "l1_uv_given_f_min", "l1_index_fc", "select_f_distance"):
            val = getattr(self, name)
            if not -1e-9 <= val <= 2.0 + 1e-9:
                raise DomainError(f"SimReport.{name} = {val!r} outside [0, 2]")
        for name in ("decoder_error", "abort_rate"):
            val = getattr(self, name)
            if not -1e-9 <= val <= 1.0 + 1e-9:
                raise DomainError(f"SimReport.{name} = {val!r} outside [0, 1]")
        if self.trials < 1:
            raise DomainError("SimReport needs trials >= 1")


def _mean_ci(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, 1.96 * math.sqrt(var / n)


def monte_carlo(
    d: Decomposition,
    cfg: SchemeConfig,
    trials: int,
    gamma: GammaTriple | None = None,
) -> SimReport:
    """Exact per-draw metrics averaged over ``trials`` binning draws,
    with 95% confidence half-widths; bit-identical for identical seeds.

    ``gamma`` feeds the error-term formulas (default: the log-rule at n).
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if gamma is None:
        gamma = parse_gamma_rule("logn", cfg.n)
    tab = _tables(d, cfg.n)
    eps_app, eps_dec, eps_app2, eps_tot = epsilon_terms(d, cfg, gamma)
    cols: dict[str, list[float]] = {k: [] for k in
                                    ("l1_uv", "l1_sel", "l1_index", "sel_dist", "dec_err", "abort")}
    best_sel = math.inf
    for t in range(trials):
        b = draw_binning(cfg, trial=t)
        m = _trial_metrics(tab, b)
        cols["l1_uv"].append(m.l1_uv)
        cols["l1_sel"].append(m.l1_uv_given_f)
        cols["l1_index"].append(m.l1_index_fc)
        cols["sel_dist"].append(m.select_f_distance)
        cols["dec_err"].append(m.decoder_error)
        cols["abort"].append(m.abort_rate)
        best_sel = min(best_sel, m.l1_uv_given_f)
    means_cis = {k: _mean_ci(v) for k, v in cols.items()}
    return SimReport(
        l1_uv=means_cis["l1_uv"][0],
        l1_uv_given_f=means_cis["l1_sel"][0],
        eps_app=eps_app,
        eps_dec=eps_dec,
        eps_app2=eps_app2,
        eps_tot=eps_tot,
        decoder_error=means_cis["dec_err"][0],
        abort_rate=means_cis["abort"][0],
        trials=trials,
        seed=cfg.seed,
        ci95=means_cis["l1_sel"][1],
        l1_uv_given_f_min=best_sel,
        l1_index_fc=means_cis["l1_index"][0],
        select_f_distance=means_cis["sel_dist"][0],
        effective_rates=cfg.effective_rates(),
        ci95_by_metric={
            "l1_uv": means_cis["l1_uv"][1],
            "l1_uv_given_f": means_cis["l1_sel"][1],
            "l1_index_fc": means_cis["l1_index"][1],
            "select_f_distance": means_cis["sel_dist"][1],
            "decoder_error": means_cis["dec_err"][1],
            "abort_rate": means_cis["abort"][1],
        },
    )


# =============================================================================
# entropy diagnostics
# =============================================================================


@dataclass(frozen=True)
class EntropyReport:
    """Message-entropy bound check under the protocol joint."""

    h_m: float
    n_times_mi: float
    slack: float
    ok: bool


def entropy_diagnostics(ucm: JointPmf, n: int, u_size: int) -> EntropyReport:
    """Check H(M) >= sum_t I(U_t; C, M) on a (U^n, C, M) protocol marginal.

    The right side equals n * I(U_T; (C, M, T)) under uniform time sharing
    (the per-letter identification).  The inequality is rigorous here
    because the protocol draws C independent of the iid U^n.  Violations
    beyond 1e-9 raise ``DomainError``.
    """
    if ucm.probs.ndim != 3:
        raise ShapeError(f"expected a (u, c, m) marginal, got rank {ucm.probs.ndim}")
    if u_size ** n != ucm.probs.shape[0]:
        raise ShapeError(
            f"u-axis size {ucm.probs.shape[0]} is not {u_size}^{n}"
        )
    p_m = ucm.probs.sum(axis=(0, 1))
    h_m = float(-np.sum(p_m[p_m > 0] * np.log2(p_m[p_m > 0])))
    total_mi = 0.0
    n_u, n_c, n_m = ucm.probs.shape
    from .measures import mutual_information

    for t in range(n):
        grouped = np.zeros((u_size, n_c, n_m))
        for u_flat in range(n_u):
            digit = sequence_digits(u_flat, u_size, n)[t]
            grouped[digit] += ucm.probs[u_flat]
        pair = grouped.reshape(u_size, n_c * n_m)
        total_mi += mutual_information(JointPmf(pair))
    slack = h_m - total_mi
    if slack < -1e-9:
        raise DomainError(f"entropy bound violated: H(M) = {h_m} < {total_mi}")
    return EntropyReport(h_m=h_m, n_times_mi=total_mi, slack=slack, ok=True)


# =============================================================================
# one-shot binning lemmas
# =============================================================================


@dataclass(frozen=True)
class OneShotReport:
    """Monte Carlo means (with 95% half-widths) for the one-shot lemmas."""

    mean_l1: float
    ci_l1: float
    mean_error: float
    ci_error: float
    trials: int
    seed: int


def _cond_entropy_density(joint_ab: JointPmf, ref: ConditionalPmf | None) -> np.ndarray:
    """-log2 T(a|b) table aligned to joint axes (a, b); +inf off support."""
    if joint_ab.probs.ndim != 2:
        raise ShapeError("one-shot lemmas need a two-axis (a, b) joint")
    if ref is None:
        pb = joint_ab.probs.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = joint_ab.probs / pb[None, :]
    else:
        if ref.rows.shape != (joint_ab.shape[1], joint_ab.shape[0]):
            raise ShapeError(
                f"reference kernel must map b->a with shape {(joint_ab.shape[1], joint_ab.shape[0])}"
            )
        cond = ref.rows.T
    with np.errstate(divide="ignore"):
        return -np.log2(cond)


def osrb_uniformity_bound(joint_ab: JointPmf, n_bins: int, gamma: float) -> float:
    """Exact bound on E || P^RB(b, k) - (uniform k) x P(b) ||_1 for a uniform
    random binning of A into ``n_bins`` bins: the mass where the conditional
    entropy density fails to clear log2(bins) by gamma, plus 2^-(gamma+1)/2."""
    if n_bins < 1:
        raise DomainError(f"n_bins must be >= 1, got {n_bins}")
    if gamma <= 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    h = _cond_entropy_density(joint_ab, None)
    good = h - math.log2(n_bins) > gamma
    fail_mass = float(joint_ab.probs[~good].sum())
    return fail_mass + 2.0 ** (-(gamma + 1.0) / 2.0)


def slc_error_bound(
    joint_ab: JointPmf, n_bins: int, gamma: float, ref: ConditionalPmf | None = None
) -> float:
    """Exact bound on the expected stochastic-likelihood-decoder error for a
    uniform binning of A into ``n_bins`` bins with side information B: the
    mass where log2(bins) fails to clear the reference conditional entropy
    density by gamma, plus 2^-gamma."""
    if n_bins < 1:
        raise DomainError(f"n_bins must be >= 1, got {n_bins}")
    if gamma <= 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    h = _cond_entropy_density(joint_ab, ref)
    good = math.log2(n_bins) - h > gamma
    fail_mass = float(joint_ab.probs[~good].sum())
    return fail_mass + 2.0 ** (-gamma)


def osrb_monte_carlo(
    joint_ab: JointPmf,
    n_bins: int,
    trials: int,
    seed: int,
    ref: ConditionalPmf | None = None,
) -> OneShotReport:
    """Empirical means of the two one-shot lemma surfaces over ``trials``
    uniform binning draws: the index-uniformity L1 and the stochastic-
    likelihood decoder error.  Exact per draw; deterministic given seed."""
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if n_bins < 1:
        raise DomainError(f"n_bins must be >= 1, got {n_bins}")
    p = joint_ab.probs
    if p.ndim != 2:
        raise ShapeError("one-shot lemmas need a two-axis (a, b) joint")
    n_a, n_b = p.shape
    check_table_size(trials * n_a * max(n_bins, n_b), "one-shot draws")
    if ref is None:
        pb = p.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = np.where(pb[None, :] > 0, p / np.where(pb[None, :] > 0, pb, 1.0), 0.0)
    else:
        if ref.rows.shape != (n_b, n_a):
            raise ShapeError(f"reference kernel must map b->a with shape {(n_b, n_a)}")
        cond = ref.rows.T
    rng = np.random.Generator(np.random.Philox(key=seed))
    bins = rng.integers(0, n_bins, size=(trials, n_a))
    onehot = np.zeros((trials, n_a, n_bins))
    np.put_along_axis(onehot, bins[:, :, None], 1.0, axis=2)
    # uniformity surface: realized P(b, k) against P(b)/n_bins
    pbk = np.einsum("ab,tak->tbk", p, onehot)
    ideal = (p.sum(axis=0) / n_bins)[None, :, None]
    l1 = np.abs(pbk - ideal).sum(axis=(1, 2))
    # decoder: normalizers Z(b, k) = sum_{a in bin k} T(a|b)
    z = np.einsum("ab,tak->tbk", cond, onehot)
    z_at = np.take_along_axis(
        z, bins[:, None, :], axis=2
    )  # (trials, n_b, n_a): Z(b, bin(a))
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(z_at > 0, cond.T[None, :, :] / np.where(z_at > 0, z_at, 1.0), 0.0)
    success = np.einsum("ab,tba->t", p, frac)
    err = 1.0 - success
    mean_l1, ci_l1 = _mean_ci(list(l1))
    mean_err, ci_err = _mean_ci(list(err))
    return OneShotReport(
        mean_l1=mean_l1, ci_l1=ci_l1, mean_error=mean_err, ci_error=ci_err,
        trials=trials, seed=seed,
    )
