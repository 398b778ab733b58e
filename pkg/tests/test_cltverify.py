"""Tests for atom laws, exact convolution, and the measured CLT gap.

The brute-force oracle enumerates all k^n symbol tuples directly, so the
convolution and tail code are checked against an implementation that
shares nothing with them.
"""

import itertools
import math

import numpy as np
import pytest

from coordsim.cltverify import (
    AtomLaw,
    be_gap,
    convolve_n,
    density_law,
    law_stats,
)
from coordsim.errors import DomainError, ResourceLimitError
from coordsim.measures import gaussian_q
from coordsim.probability import (
    ConditionalPmf,
    JointPmf,
    Pmf,
    entropy_density,
    info_density,
)


def bsc_joint(delta: float) -> JointPmf:
    return JointPmf(0.5 * np.array([[1 - delta, delta], [delta, 1 - delta]]))


def brute_force_sum_law(law: AtomLaw, n: int):
    """Oracle: enumerate every length-n tuple of atoms."""
    table = {}
    for combo in itertools.product(range(law.n_atoms), repeat=n):
        s = round(sum(law.values[i] for i in combo), 9)
        table[s] = table.get(s, 0.0) + math.prod(law.probs[i] for i in combo)
    return sorted(table.items())


# ---------------------------------------------------------------------------
# AtomLaw construction
# ---------------------------------------------------------------------------


def test_atom_law_requires_increasing_values():
    with pytest.raises(DomainError):
        AtomLaw(np.array([0.0, 0.0]), np.array([0.5, 0.5]))
    with pytest.raises(DomainError):
        AtomLaw(np.array([1.0, -1.0]), np.array([0.5, 0.5]))


def test_atom_law_requires_normalization():
    with pytest.raises(DomainError):
        AtomLaw(np.array([0.0, 1.0]), np.array([0.5, 0.6]))


def test_tail_conventions():
    law = AtomLaw(np.array([-1.0, 2.0]), np.array([0.3, 0.7]))
    assert law.tail_gt(-1.0) == pytest.approx(0.7)
    assert law.tail_ge(-1.0) == pytest.approx(1.0)
    assert law.tail_gt(2.0) == 0.0
    assert law.tail_ge(2.0) == pytest.approx(0.7)
    assert law.tail_gt(0.0) == pytest.approx(0.7)


# ---------------------------------------------------------------------------
# density pushforward
# ---------------------------------------------------------------------------


def test_density_law_bsc_two_atoms():
    j = bsc_joint(0.11)
    law = density_law(info_density(j), j)
    assert law.n_atoms == 2
    assert law.values[0] == pytest.approx(math.log2(2 * 0.11), abs=1e-12)
    assert law.values[1] == pytest.approx(math.log2(2 * 0.89), abs=1e-12)
    assert law.probs[0] == pytest.approx(0.11, abs=1e-12)
    assert law.probs[1] == pytest.approx(0.89, abs=1e-12)


def test_density_law_merges_ties():
    # copy chain: h(w|u) is identically 0 on support -> single atom
    j = JointPmf(np.array([[0.5, 0.0], [0.0, 0.5]]))
    law = density_law(info_density(j), j)
    assert law.n_atoms == 1
    assert law.values[0] == pytest.approx(1.0)
    assert law.probs[0] == pytest.approx(1.0)


def test_density_law_moments_match_be_stats():
    from coordsim.measures import be_stats

    rng = np.random.default_rng(31)
    for _ in range(20):
        a = rng.random((3, 3)) + 1e-3
        j = JointPmf(a / a.sum())
        dens = info_density(j)
        s_direct = be_stats(dens, j)
        s_law = law_stats(density_law(dens, j))
        assert s_law.mu == pytest.approx(s_direct.mu, abs=1e-12)
        assert s_law.v == pytest.approx(s_direct.v, abs=1e-12)
        assert s_law.t3 == pytest.approx(s_direct.t3, abs=1e-12)


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------


def test_convolve_binomial_hand_values():
    p, q = 0.11, 0.89
    lo, hi = math.log2(2 * p), math.log2(2 * q)
    law = AtomLaw(np.array([lo, hi]), np.array([p, q]))
    out = convolve_n(law, 3)
    assert out.n_atoms == 4
    np.testing.assert_allclose(out.values, [3 * lo, 2 * lo + hi, lo + 2 * hi, 3 * hi], atol=1e-10)
    np.testing.assert_allclose(out.probs, [p ** 3, 3 * p * p * q, 3 * p * q * q, q ** 3], atol=1e-12)


def test_convolve_one_is_identity():
    law = AtomLaw(np.array([0.0, 1.0]), np.array([0.4, 0.6]))
    out = convolve_n(law, 1)
    np.testing.assert_allclose(out.values, law.values)
    np.testing.assert_allclose(out.probs, law.probs)


def test_convolve_matches_brute_force():
    rng = np.random.default_rng(32)
    for _ in range(5):
        vals = np.sort(rng.normal(size=3))
        while np.min(np.diff(vals)) < 1e-6:
            vals = np.sort(rng.normal(size=3))
        pr = rng.random(3) + 0.1
        law = AtomLaw(vals, pr / pr.sum())
        out = convolve_n(law, 4)
        oracle = brute_force_sum_law(law, 4)
        assert out.n_atoms == len(oracle)
        for (ov, op), mv, mp in zip(oracle, out.values, out.probs):
            assert mv == pytest.approx(ov, abs=1e-8)
            assert mp == pytest.approx(op, abs=1e-12)


def test_convolve_moment_additivity():
    rng = np.random.default_rng(33)
    for _ in range(10):
        vals = np.sort(rng.normal(size=4) * 3)
        if np.min(np.diff(vals)) < 1e-6:
            continue
        pr = rng.random(4) + 0.05
        law = AtomLaw(vals, pr / pr.sum())
        base = law_stats(law)
        for n in (2, 5):
            s = law_stats(convolve_n(law, n))
            assert s.mu == pytest.approx(n * base.mu, abs=1e-9)
            assert s.v == pytest.approx(n * base.v, abs=1e-9)


def test_convolve_respects_memory_cap(monkeypatch):
    monkeypatch.setenv("COORDSIM_MEM_CAP", "1000")
    vals = np.arange(64) * math.pi / 7  # irrational spacing: no merging
    law = AtomLaw(vals, np.full(64, 1.0 / 64))
    with pytest.raises(ResourceLimitError):
        convolve_n(law, 2)


# ---------------------------------------------------------------------------
# CLT gap
# ---------------------------------------------------------------------------


def test_be_gap_degenerate_law():
    law = AtomLaw(np.array([1.0]), np.array([1.0]))
    r = be_gap(law, 8)
    assert r.degenerate
    assert r.gap == 0.0
    assert r.bound == 0.0


def test_be_gap_matches_brute_force_scan():
    # oracle: recompute the sup by scanning one-sided tails at every atom of
    # a brute-force convolution, plus a dense grid as a safety net
    p, q = 0.3, 0.7
    law = AtomLaw(np.array([-1.0, 2.0]), np.array([p, q]))
    n = 6
    stats = law_stats(law)
    atoms = brute_force_sum_law(law, n)
    center, scale = n * stats.mu, math.sqrt(n * stats.v)

    def tail_gt(x):
        return sum(pr for v, pr in atoms if v > x + 1e-9)

    def tail_ge(x):
        return sum(pr for v, pr in atoms if v >= x - 1e-9)

    worst = 0.0
    for v, _ in atoms:
        t = (v - center) / scale
        worst = max(worst, abs(tail_gt(v) - gaussian_q(t)), abs(tail_ge(v) - gaussian_q(t)))
    for t in np.linspace(-5, 5, 4001):
        worst = max(worst, abs(tail_gt(center + t * scale) - gaussian_q(t)))

    r = be_gap(law, n)
    assert r.gap == pytest.approx(worst, abs=1e-9)
    assert not r.degenerate


def test_be_gap_within_bound_bsc_blocklengths():
    j = bsc_joint(0.11)
    law = density_law(info_density(j), j)
    for n in (4, 16, 64):
        r = be_gap(law, n)
        assert r.gap <= r.bound
        assert r.bound == pytest.approx(law_stats(law).b / math.sqrt(n), rel=1e-12)


def test_be_gap_bound_shrinks_like_sqrt_n():
    j = bsc_joint(0.2)
    law = density_law(info_density(j), j)
    r4, r16 = be_gap(law, 4), be_gap(law, 16)
    assert r16.bound == pytest.approx(r4.bound / 2, rel=1e-12)
    assert r16.gap < r4.bound
