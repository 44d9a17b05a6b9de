"""Closed-form and enumerative occupancy laws."""
from __future__ import annotations

import math
from collections import defaultdict
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np
from scipy import stats

from .circle import dist_pos

MAX_PARTITION_K = 12


def _comb(n, k):
    if k < 0 or n < 0 or k > n:
        return 0
    return math.comb(n, k)


def pmf_N_continuous(k: int, W) -> list:
    """P(N_k = 1 + j) for j = 0..k-1: Binomial(k-1, 1-W) shifted by one."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 <= W < 1:
        raise ValueError("W must lie in [0, 1)")
    R = 1 - W
    return [_comb(k - 1, j) * R**j * W ** (k - 1 - j) for j in range(k)]


def piling_Q(k: int, W):
    return W ** (k - 1)


def piling_Q_discrete(k: int, W, n: int):
    return (W + Fraction(1, n) if isinstance(W, Fraction) else W + 1 / n) ** (k - 1)


# --- spacings ----------------------------------------------------------------

def sample_dirichlet_free(b: int, R: float, rng) -> list:
    """R times a uniform point of the simplex, via spacings of b-1 uniforms."""
    if b < 1 or R <= 0:
        raise ValueError("need b >= 1 and R > 0")
    cuts = np.sort(rng.uniform(0.0, R, size=b - 1))
    return list(np.diff(np.concatenate(([0.0], cuts, [R]))))


def count_compositions(R: int, b: int) -> int:
    return _comb(R - 1, b - 1)


def compositions(R: int, b: int) -> Iterator[tuple]:
    """All compositions of R into b positive parts."""
    import itertools
    for cuts in itertools.combinations(range(1, R), b - 1):
        pts = (0,) + cuts + (R,)
        yield tuple(pts[i + 1] - pts[i] for i in range(b))


def sample_ddirichlet(R: int, b: int, rng) -> tuple:
    """Uniform composition of R into b positive parts."""
    if not 1 <= b <= R:
        raise ValueError("need 1 <= b <= R")
    cuts = np.sort(rng.choice(np.arange(1, R), size=b - 1, replace=False))
    pts = np.concatenate(([0], cuts, [R]))
    return tuple(int(x) for x in np.diff(pts))


# --- block law -------------------------------------------------------------------

def translation_measure(M0, W, b: int):
    """Volume of admissible start positions for b blocks, the first of length M0."""
    if b < 1:
        raise ValueError("b must be >= 1")
    R = 1 - W
    return M0 * R ** (b - 1) / math.factorial(b - 1) + R**b / math.factorial(b)


def set_partitions(k: int) -> Iterator[list]:
    """Set partitions of {0..k-1} as lists of blocks, via restricted growth strings."""
    if k > MAX_PARTITION_K:
        raise ValueError(f"k={k} exceeds the enumeration cap {MAX_PARTITION_K}")
    if k == 0:
        yield []
        return
    a = [0] * k
    while True:
        nb = max(a) + 1
        blocks = [[] for _ in range(nb)]
        for i, c in enumerate(a):
            blocks[c].append(i)
        yield blocks
        # next restricted growth string
        i = k - 1
        while i > 0 and a[i] == max(a[:i]) + 1:
            i -= 1
        if i == 0:
            return
        a[i] += 1
        for j in range(i + 1, k):
            a[j] = 0


def _weight(masses, block):
    return sum((masses[i] for i in block), 0)


def _Q(masses, block):
    return _weight(masses, block) ** (len(block) - 1)


def _key(x):
    return x if isinstance(x, Fraction) else round(float(x), 12)


def joint_block_density(masses: Sequence, partition: Sequence, starts: Sequence):
    """Density (per unit of each start) of blocks made of the given mass groups at the given starts."""
    k = len(masses)
    if k > MAX_PARTITION_K:
        raise ValueError("too many masses for enumeration")
    b = len(partition)
    if sorted(i for blk in partition for i in blk) != list(range(k)):
        raise ValueError("not a partition of the mass indices")
    if len(starts) != b:
        raise ValueError("one start per block")
    W = sum(masses, 0)
    if W >= 1:
        raise ValueError("total mass must be < 1")
    if b >= 2:
        walked = 0
        for j in range(b):
            gap = dist_pos(starts[j], starts[(j + 1) % b])
            if gap <= _weight(masses, partition[j]):
                return 0 * W
            walked += gap
        if abs(float(walked) - 1.0) > 1e-9:   # starts not in cyclic order
            return 0 * W
    out = 1
    for blk in partition:
        out = out * _Q(masses, blk)
    return out


def block_length_law(masses: Sequence, M: Sequence):
    """Probability that the blocks, listed from the one anchored at 0, have lengths M."""
    k = len(masses)
    W = sum(masses, 0)
    b = len(M)
    target = sorted(_key(x) for x in M)
    total = 0
    for part in set_partitions(k):
        if len(part) != b:
            continue
        ws = [_weight(masses, blk) for blk in part]
        if sorted(_key(w) for w in ws) != target:
            continue
        q = 1
        for blk in part:
            q = q * _Q(masses, blk)
        mult = 1
        for v in set(target):
            mult *= math.factorial(target.count(v))
        total = total + q * mult
    return translation_measure(M[0], W, b) * total


def sorted_block_law(masses: Sequence) -> dict:
    """Law of the sorted (decreasing) tuple of block lengths."""
    W = sum(masses, 0)
    out: dict = defaultdict(lambda: 0)
    for part in set_partitions(len(masses)):
        b = len(part)
        ws = [_weight(masses, blk) for blk in part]
        q = 1
        for blk in part:
            q = q * _Q(masses, blk)
        tsum = sum((translation_measure(w, W, b) for w in ws), 0)
        key = tuple(sorted((_key(w) for w in ws), reverse=True))
        out[key] = out[key] + q * math.factorial(b - 1) * tsum
    return dict(out)


# --- number of blocks: Markov transitions -------------------------------------

def transition_N_continuous(n_from: int, W_before, m_next) -> dict:
    """Law of the next block count given n_from blocks, total mass W_before and the next mass."""
    if n_from < 1:
        raise ValueError("need at least one block")
    R = 1 - W_before
    if m_next < 0 or m_next >= R:
        raise ValueError("mass must fit in the free space")
    x = m_next / R
    out = {n_from + 1: R * (1 - x) ** n_from}
    for j in range(n_from):
        out[n_from - j] = (R * _comb(n_from, j + 1) * x ** (j + 1) * (1 - x) ** (n_from - 1 - j)
                           + (1 - R) * _comb(n_from - 1, j) * x**j * (1 - x) ** (n_from - 1 - j))
    return out


def compose_transitions(masses: Sequence) -> dict:
    """Law of N_k obtained by chaining one-step transitions from N_1 = 1."""
    law = {1: 1}
    W = masses[0]
    for m in masses[1:]:
        nxt: dict = defaultdict(lambda: 0)
        for n, p in law.items():
            for n2, q in transition_N_continuous(n, W, m).items():
                nxt[n2] = nxt[n2] + p * q
        law = dict(nxt)
        W = W + m
    return law


def partial_sum_window(x: int, j: int, ell: int, R: int) -> Fraction:
    """P(S_j <= x < S_{j+1}) for partial sums of a uniform composition of R into ell parts."""
    if x < 0:
        return Fraction(0)
    if x >= R:
        return Fraction(int(j == ell))
    return Fraction(_comb(x, j) * _comb(R - 1 - x, ell - 1 - j), _comb(R - 1, ell - 1))


def transition_N_discrete(b: int, W, n: int, m_next, R: int | None = None) -> dict:
    """Law of the next block count on the 1/n grid.

    ``R`` is the total free length in cells; it defaults to n(1 - W). The
    gaps between blocks then form a uniform composition of R.
    """
    W, m_next = Fraction(W), Fraction(m_next)
    if (W * n).denominator != 1 or (m_next * n).denominator != 1:
        raise ValueError("masses must be multiples of 1/n")
    x = int(m_next * n)
    if R is None:
        R = int(n * (1 - W))
    q = W + Fraction(b, n)
    p = 1 - q
    out = {b + 1: p * partial_sum_window(x, 0, b + 1, R)}
    for j in range(b):
        out[b - j] = p * partial_sum_window(x, j + 1, b + 1, R) + q * partial_sum_window(x, j, b, R)
    return {k: v for k, v in out.items() if v}


def surjections(a: int, b: int) -> int:
    """Number of maps from an a-set onto a b-set."""
    return sum((-1) ** (b - j) * _comb(b, j) * j**a for j in range(b + 1))


def pmf_N_discrete(k: int, W, n: int) -> dict:
    """Law of the number of blocks after k grid masses of total W (multiple of 1/n)."""
    W = Fraction(W)
    if (W * n).denominator != 1:
        raise ValueError("nW must be an integer")
    M = int(W * n)
    out: dict = defaultdict(Fraction)
    for m in range(1, min(k, n) + 1):
        pz = Fraction(_comb(n, m) * surjections(k, m), n**k)
        if pz == 0:
            continue
        for c in range(0, m):
            h = Fraction(_comb(n - 1 - M, c) * _comb(M, m - 1 - c), _comb(n - 1, m - 1))
            if h:
                out[1 + c] += pz * h
    return dict(out)


# --- biased first free space --------------------------------------------------

def biased_F0_density(b: int, R: float, x: float, mixture: str = "occupied-first") -> float:
    """Density of F_0 (the free gap anchored at 0) given b blocks and free length R.

    With probability 1-R the origin is occupied and F_0 is a plain spacing
    (R * Beta(1, b-1)); with probability R the origin is free and F_0 is the
    size-biased spacing (R * Beta(2, b-1)). ``mixture="swapped"`` gives the
    other weighting, kept for comparison.
    """
    if b < 2:
        raise ValueError("b=1 is a point mass at R")
    if not 0 <= x <= R:
        return 0.0
    g1 = stats.beta.pdf(x / R, 1, b - 1) / R
    g2 = stats.beta.pdf(x / R, 2, b - 1) / R
    w1, w2 = (1 - R, R) if mixture == "occupied-first" else (R, 1 - R)
    return float(w1 * g1 + w2 * g2)


def biased_F0_cdf(b: int, R: float, x, mixture: str = "occupied-first"):
    x = np.clip(np.asarray(x, dtype=float) / R, 0.0, 1.0)
    c1 = stats.beta.cdf(x, 1, b - 1)
    c2 = stats.beta.cdf(x, 2, b - 1)
    w1, w2 = (1 - R, R) if mixture == "occupied-first" else (R, 1 - R)
    return w1 * c1 + w2 * c2
