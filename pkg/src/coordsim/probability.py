"""Exact finite-alphabet probability: pmfs, kernels, joints, densities.

Core problem
------------
Everything downstream (rate bounds, binning simulation, hypothesis tests)
manipulates *exact* distributions on small product alphabets.  This module
provides the four value types and the handful of operations they need:

* ``Pmf``            -- distribution on one finite alphabet
* ``ConditionalPmf`` -- row-stochastic kernel (one Pmf per input letter)
* ``JointPmf``       -- distribution on a product alphabet, axes optionally named
* ``DensityTable``   -- pointwise log-quantity (information/entropy density)
                        defined on the support of a reference distribution

Conventions
-----------
* All logarithms are base 2; densities are in bits.
* Product alphabets index C-style; n-fold extensions order digits with the
  FIRST symbol most significant, so sequence (a_1 .. a_n) has flat index
  sum(a_t * s**(n-t)).  ``np.kron`` composes in exactly this order.
* Normalization is enforced to 1e-12 at construction; arrays are copied and
  frozen so values can be shared safely.
* Exact table sizes are capped (default 2**26 entries, override with the
  COORDSIM_MEM_CAP environment variable); blowing the cap raises
  ``ResourceLimitError`` with the required size attached.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ResourceLimitError, ShapeError

NORM_TOL = 1e-12
_NEG_DUST = -1e-15

# =============================================================================
# memory cap
# =============================================================================


def memory_cap() -> int:
    """Maximum number of entries any exact table may hold.

    Reads COORDSIM_MEM_CAP (integer number of entries) on every call so tests
    can tighten it; defaults to 2**26.
    """
    raw = os.environ.get("COORDSIM_MEM_CAP")
    if raw is None:
        return 1 << 26
    try:
        cap = int(raw)
    except ValueError as exc:
        raise DomainError(f"COORDSIM_MEM_CAP must be an integer, got {raw!r}") from exc
    if cap <= 0:
        raise DomainError(f"COORDSIM_MEM_CAP must be positive, got {cap}")
    return cap


def check_table_size(entries: int, what: str = "table") -> None:
    """Raise ``ResourceLimitError`` if an exact table of ``entries`` cells
    would exceed the configured cap."""
    cap = memory_cap()
    if entries > cap:
        raise ResourceLimitError(
            f"{what} needs {entries} entries, cap is {cap} "
            f"(set COORDSIM_MEM_CAP to raise it)",
            required=entries,
        )


# =============================================================================
# validation helpers
# =============================================================================


def _clean_probs(arr: np.ndarray, what: str) -> np.ndarray:
    """Validate and sanitize a probability array: finite, nonnegative up to
    float dust, total mass 1 within NORM_TOL.  Returns a read-only copy."""
    a = np.array(arr, dtype=np.float64, copy=True)
    if a.size == 0:
        raise ShapeError(f"{what} must be non-empty")
    if not np.all(np.isfinite(a)):
        bad = np.unravel_index(int(np.argmin(np.isfinite(a))), a.shape)
        raise DomainError(f"{what} has a non-finite entry", index=bad)
    neg = a < 0
    if np.any(a < _NEG_DUST):
        bad = np.unravel_index(int(np.argmin(a)), a.shape)
        raise DomainError(f"{what} has a negative entry {a[bad]!r}", index=bad)
    a[neg] = 0.0  # clamp -1e-15 < x < 0 float dust
    total = float(a.sum())
    if abs(total - 1.0) > NORM_TOL:
        raise DomainError(f"{what} sums to {total!r}, not 1 within {NORM_TOL}")
    a.setflags(write=False)
    return a


# =============================================================================
# value types
# =============================================================================


@dataclass(frozen=True)
class Pmf:
    """Probability mass function on a finite alphabet {0, .., size-1}."""

    probs: np.ndarray

    def __post_init__(self):
        a = _clean_probs(self.probs, "Pmf")
        if a.ndim != 1:
            raise ShapeError(f"Pmf must be 1-D, got shape {a.shape}")
        object.__setattr__(self, "probs", a)

    @property
    def size(self) -> int:
        return self.probs.shape[0]

    @property
    def support(self) -> np.ndarray:
        """Boolean mask of letters with strictly positive mass."""
        return self.probs > 0.0

    @staticmethod
    def uniform(size: int) -> "Pmf":
        if size <= 0:
            raise DomainError(f"alphabet size must be positive, got {size}")
        return Pmf(np.full(size, 1.0 / size))

    @staticmethod
    def point(size: int, index: int) -> "Pmf":
        if not 0 <= index < size:
            raise DomainError(f"point mass index {index} outside alphabet of size {size}")
        p = np.zeros(size)
        p[index] = 1.0
        return Pmf(p)


@dataclass(frozen=True)
class ConditionalPmf:
    """Row-stochastic kernel: ``rows[x, y] = P(Y = y | X = x)``.

    ``fallback_rows`` marks input letters whose conditional was undefined in
    the source joint (zero marginal mass) and was replaced by the uniform row.
    It is None for kernels built directly from data.
    """

    rows: np.ndarray
    fallback_rows: np.ndarray | None = None

    def __post_init__(self):
        a = np.array(self.rows, dtype=np.float64, copy=True)
        if a.ndim != 2 or a.size == 0:
            raise ShapeError(f"ConditionalPmf rows must be a non-empty 2-D array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise DomainError("ConditionalPmf has a non-finite entry")
        if np.any(a < _NEG_DUST):
            bad = np.unravel_index(int(np.argmin(a)), a.shape)
            raise DomainError(f"ConditionalPmf has a negative entry {a[bad]!r}", index=bad)
        a[a < 0] = 0.0
        sums = a.sum(axis=1)
        worst = int(np.argmax(np.abs(sums - 1.0)))
        if abs(sums[worst] - 1.0) > NORM_TOL:
            raise DomainError(
                f"ConditionalPmf row {worst} sums to {sums[worst]!r}, not 1 within {NORM_TOL}",
                index=worst,
            )
        a.setflags(write=False)
        object.__setattr__(self, "rows", a)
        if self.fallback_rows is not None:
            fb = np.array(self.fallback_rows, dtype=bool, copy=True)
            if fb.shape != (a.shape[0],):
                raise ShapeError("fallback_rows must have one flag per input letter")
            fb.setflags(write=False)
            object.__setattr__(self, "fallback_rows", fb)

    @property
    def input_size(self) -> int:
        return self.rows.shape[0]

    @property
    def output_size(self) -> int:
        return self.rows.shape[1]

    def row(self, x: int) -> Pmf:
        return Pmf(self.rows[x])


@dataclass(frozen=True)
class JointPmf:
    """Distribution on a product alphabet, one array axis per component.

    ``axes`` optionally names the components (e.g. ("u", "w", "v")); names are
    carried through marginalization so callers can address axes by meaning
    instead of position.
    """

    probs: np.ndarray
    axes: tuple[str, ...] | None = None

    def __post_init__(self):
        a = _clean_probs(self.probs, "JointPmf")
        if a.ndim < 1:
            raise ShapeError("JointPmf needs at least one axis")
        object.__setattr__(self, "probs", a)
        if self.axes is not None:
            names = tuple(self.axes)
            if len(names) != a.ndim:
                raise ShapeError(f"{len(names)} axis names for a rank-{a.ndim} joint")
            if len(set(names)) != len(names):
                raise ShapeError(f"duplicate axis names in {names}")
            object.__setattr__(self, "axes", names)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.probs.shape

    def axis_index(self, name_or_idx: str | int) -> int:
        if isinstance(name_or_idx, str):
            if self.axes is None or name_or_idx not in self.axes:
                raise ShapeError(f"joint has no axis named {name_or_idx!r} (axes={self.axes})")
            return self.axes.index(name_or_idx)
        idx = int(name_or_idx)
        if not -self.probs.ndim <= idx < self.probs.ndim:
            raise ShapeError(f"axis {idx} out of range for rank-{self.probs.ndim} joint")
        return idx % self.probs.ndim


@dataclass(frozen=True)
class DensityTable:
    """Pointwise log-quantity (bits) on the support of a reference law.

    ``values`` holds the density where ``support`` is True and NaN elsewhere;
    constructors guarantee on-support entries equal their defining logarithm
    to 1e-10.
    """

    values: np.ndarray
    support: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        s = np.array(self.support, dtype=bool, copy=True)
        if v.shape != s.shape:
            raise ShapeError(f"values shape {v.shape} != support shape {s.shape}")
        if v.size and np.any(~np.isfinite(v[s])):
            raise DomainError("DensityTable has a non-finite on-support value")
        v[~s] = np.nan
        v.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "support", s)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape


# =============================================================================
# distances and divergences
# =============================================================================


def l1_distance(p, q) -> float:
    """Total ``sum |p - q|`` between two distributions of matching shape.

    Accepts any mix of Pmf/JointPmf/plain arrays; only shapes must agree.
    The value is in [0, 2].
    """
    pa = p.probs if isinstance(p, (Pmf, JointPmf)) else np.asarray(p, dtype=np.float64)
    qa = q.probs if isinstance(q, (Pmf, JointPmf)) else np.asarray(q, dtype=np.float64)
    if pa.shape != qa.shape:
        raise ShapeError(f"l1_distance shape mismatch: {pa.shape} vs {qa.shape}")
    return float(np.abs(pa - qa).sum())


def kl_divergence(p, q) -> float:
    """Kullback-Leibler divergence D(p || q) in bits.

    Raises ``DomainError`` (carrying the offending index) when p puts mass
    where q does not.
    """
    pa = p.probs if isinstance(p, (Pmf, JointPmf)) else np.asarray(p, dtype=np.float64)
    qa = q.probs if isinstance(q, (Pmf, JointPmf)) else np.asarray(q, dtype=np.float64)
    if pa.shape != qa.shape:
        raise ShapeError(f"kl_divergence shape mismatch: {pa.shape} vs {qa.shape}")
    viol = (pa > 0) & (qa <= 0)
    if np.any(viol):
        bad = np.unravel_index(int(np.argmax(viol)), pa.shape)
        raise DomainError("kl_divergence: p is not absolutely continuous w.r.t. q", index=bad)
    mask = pa > 0
    return float(np.sum(pa[mask] * (np.log2(pa[mask]) - np.log2(qa[mask]))))


# =============================================================================
# construction and shaping
# =============================================================================


def compose_chain(p_u: Pmf, w_given_u: ConditionalPmf, v_given_w: ConditionalPmf) -> JointPmf:
    """Joint law of a Markov chain U - W - V from its three factors.

    Returns the joint over axes ("u", "w", "v") with
    P(u, w, v) = p_u(u) * w_given_u(w|u) * v_given_w(v|w).
    """
    if w_given_u.input_size != p_u.size:
        raise ShapeError(
            f"w_given_u expects {w_given_u.input_size} input letters, p_u has {p_u.size}"
        )
    if v_given_w.input_size != w_given_u.output_size:
        raise ShapeError(
            f"v_given_w expects {v_given_w.input_size} input letters, "
            f"w_given_u outputs {w_given_u.output_size}"
        )
    probs = np.einsum("u,uw,wv->uwv", p_u.probs, w_given_u.rows, v_given_w.rows)
    return JointPmf(probs, axes=("u", "w", "v"))


def marginalize(joint: JointPmf, keep) -> Pmf | JointPmf:
    """Marginal of ``joint`` on the given axes (names or indices, any order
    accepted; result axes follow the joint's own axis order).

    Returns a Pmf when a single axis is kept, else a JointPmf (axis names
    preserved when present).
    """
    if isinstance(keep, (str, int)):
        keep = (keep,)
    idxs = sorted({joint.axis_index(k) for k in keep})
    if not idxs:
        raise ShapeError("marginalize must keep at least one axis")
    drop = tuple(i for i in range(joint.probs.ndim) if i not in idxs)
    marg = joint.probs.sum(axis=drop) if drop else joint.probs
    if len(idxs) == 1:
        return Pmf(marg)
    names = tuple(joint.axes[i] for i in idxs) if joint.axes is not None else None
    return JointPmf(marg, axes=names)


def conditional(joint: JointPmf, given) -> ConditionalPmf:
    """Conditional kernel of the remaining axes given ``given`` axes.

    Input letters enumerate the given axes (C-order over their product
    alphabet, in the joint's axis order); output letters enumerate the rest.
    Rows with zero marginal mass have no defined conditional: they are set to
    the uniform row and flagged in ``fallback_rows``.
    """
    if isinstance(given, (str, int)):
        given = (given,)
    gidx = sorted({joint.axis_index(g) for g in given})
    if not gidx:
        raise ShapeError("conditional needs at least one conditioning axis")
    rest = [i for i in range(joint.probs.ndim) if i not in gidx]
    if not rest:
        raise ShapeError("conditional needs at least one target axis")
    perm = gidx + rest
    moved = np.transpose(joint.probs, perm)
    n_in = int(np.prod([joint.probs.shape[i] for i in gidx]))
    n_out = int(np.prod([joint.probs.shape[i] for i in rest]))
    flat = moved.reshape(n_in, n_out)
    row_mass = flat.sum(axis=1)
    fallback = row_mass <= 0.0
    rows = np.empty_like(flat)
    ok = ~fallback
    rows[ok] = flat[ok] / row_mass[ok, None]
    rows[fallback] = 1.0 / n_out
    return ConditionalPmf(rows, fallback_rows=fallback)


def _outer_extend(block: np.ndarray, step: np.ndarray) -> np.ndarray:
    """One product step of the axiswise iid extension: combine a rank-k block
    (axes sized S_i) with the rank-k base (axes sized s_i) into axes sized
    S_i * s_i, earlier symbols most significant."""
    k = block.ndim
    out = np.multiply.outer(block, step)  # axes (B1..Bk, b1..bk)
    order = [i for pair in zip(range(k), range(k, 2 * k)) for i in pair]
    out = np.transpose(out, order)
    new_shape = tuple(block.shape[i] * step.shape[i] for i in range(k))
    return out.reshape(new_shape)


def iid_extension(obj, n: int):
    """n-fold iid product of a Pmf, JointPmf, or ConditionalPmf.

    Each original axis becomes one composite axis of size ``s**n`` whose flat
    index reads the n symbols first-symbol-most-significant.  Axis names are
    preserved for joints.  Raises ``ResourceLimitError`` when the extended
    table would blow the memory cap.
    """
    if n < 1:
        raise DomainError(f"iid extension length must be >= 1, got {n}")
    if isinstance(obj, Pmf):
        check_table_size(obj.size ** n, "iid pmf")
        out = obj.probs
        for _ in range(n - 1):
            out = np.kron(out, obj.probs)
        return Pmf(_renormalize(out))
    if isinstance(obj, ConditionalPmf):
        check_table_size((obj.input_size ** n) * (obj.output_size ** n), "iid kernel")
        out = obj.rows
        for _ in range(n - 1):
            out = np.kron(out, obj.rows)
        out = out / out.sum(axis=1, keepdims=True)
        return ConditionalPmf(out)
    if isinstance(obj, JointPmf):
        entries = 1
        for s in obj.shape:
            entries *= s ** n
        check_table_size(entries, "iid joint")
        out = obj.probs
        for _ in range(n - 1):
            out = _outer_extend(out, obj.probs)
        return JointPmf(_renormalize(out), axes=obj.axes)
    raise ShapeError(f"iid_extension does not handle {type(obj).__name__}")


def _renormalize(a: np.ndarray) -> np.ndarray:
    """Divide out the float drift of a long product so constructors accept it."""
    total = a.sum()
    if not math.isfinite(total) or total <= 0:
        raise DomainError(f"cannot renormalize array with total mass {total!r}")
    return a / total


def sequence_digits(flat_index: int, base: int, n: int) -> tuple[int, ...]:
    """Decode a composite-axis flat index into its n symbols
    (first symbol most significant)."""
    if not 0 <= flat_index < base ** n:
        raise DomainError(f"flat index {flat_index} outside [0, {base ** n})")
    digits = []
    x = flat_index
    for _ in range(n):
        digits.append(x % base)
        x //= base
    return tuple(reversed(digits))


def sequence_index(digits, base: int) -> int:
    """Inverse of ``sequence_digits``."""
    idx = 0
    for d in digits:
        if not 0 <= d < base:
            raise DomainError(f"digit {d} outside alphabet of size {base}")
        idx = idx * base + int(d)
    return idx


def regroup_pair(joint: JointPmf, left, right) -> JointPmf:
    """Reshape a multi-axis joint into a two-axis joint over composite
    alphabets ``left`` x ``right`` (axis names or indices; every axis must be
    used exactly once).  Flat indices enumerate each group C-style in the
    order given."""
    if isinstance(left, (str, int)):
        left = (left,)
    if isinstance(right, (str, int)):
        right = (right,)
    li = [joint.axis_index(a) for a in left]
    ri = [joint.axis_index(a) for a in right]
    used = li + ri
    if sorted(used) != list(range(joint.probs.ndim)):
        raise ShapeError(
            f"regroup_pair must use every axis exactly once, got {used} "
            f"for rank {joint.probs.ndim}"
        )
    moved = np.transpose(joint.probs, used)
    n_left = int(np.prod([joint.probs.shape[i] for i in li]))
    n_right = int(np.prod([joint.probs.shape[i] for i in ri]))
    return JointPmf(moved.reshape(n_left, n_right))


# =============================================================================
# densities
# =============================================================================


def info_density(joint: JointPmf) -> DensityTable:
    """Information density table i(a; b) = log2( P(a,b) / (P(a) P(b)) ) for a
    two-axis joint, defined on the joint's support."""
    if joint.probs.ndim != 2:
        raise ShapeError(f"info_density needs a two-axis joint, got rank {joint.probs.ndim}")
    pa = joint.probs.sum(axis=1)
    pb = joint.probs.sum(axis=0)
    supp = joint.probs > 0
    vals = np.full(joint.shape, np.nan)
    # support of the joint implies support of both marginals
    vals[supp] = (
        np.log2(joint.probs[supp])
        - np.log2(pa[supp.nonzero()[0]])
        - np.log2(pb[supp.nonzero()[1]])
    )
    return DensityTable(vals, supp)


def entropy_density(p: Pmf | JointPmf) -> DensityTable:
    """Entropy density table h(a) = -log2 P(a) on the support of ``p``."""
    arr = p.probs
    supp = arr > 0
    vals = np.full(arr.shape, np.nan)
    vals[supp] = -np.log2(arr[supp])
    return DensityTable(vals, supp)
