"""The collecting path S_x = -x + sum_{u_j <= x} m_j and its excursions.

Right-pushing dispersion on the circle is a queue read along the circle:
started from a point with zero carry, the height of S above its running
minimum is the mass still being pushed, and the stretches where it is
positive are exactly the occupied blocks.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from itertools import accumulate
from typing import Callable, Sequence

import numpy as np

from .circle import Real


@dataclass(frozen=True)
class CollectingPath:
    positions: tuple   # distinct, sorted, in [0, 1)
    jumps: tuple       # positive jump sizes
    W: Real

    @property
    def S1(self) -> Real:
        return self.W - 1

    def _mass_upto(self, x, inclusive=True) -> Real:
        i = bisect_right(self.positions, x) if inclusive else _bisect_left(self.positions, x)
        return self._cum[i]

    @property
    def _cum(self):
        c = self.__dict__.get("_cum_cache")
        if c is None:
            c = [self.W - self.W] + list(accumulate(self.jumps))
            object.__setattr__(self, "_cum_cache", c)
        return c

    def __call__(self, x) -> Real:
        """S(x) for x in [0, 1]; right-continuous."""
        return -x + self._mass_upto(x)

    def left_limit(self, x) -> Real:
        return -x + self._mass_upto(x, inclusive=False)

    def extended(self, x) -> Real:
        """Periodic-drift extension: S(frac x) + floor(x) S_1."""
        k = math.floor(x)
        return self(x - k) + k * self.S1

    def extended_left(self, x) -> Real:
        k = math.floor(x)
        r = x - k
        if r == 0:
            # left limit at an integer comes from the previous period's end
            return self.S1 + (k - 1) * self.S1
        return self.left_limit(r) + k * self.S1


def _bisect_left(seq, x):
    from bisect import bisect_left
    return bisect_left(seq, x)


@dataclass(frozen=True)
class Excursion:
    start: Real
    length: Real
    level: Real


@dataclass(frozen=True)
class ExcursionDecomposition:
    excursions: list
    a: Real

    @property
    def lengths(self) -> list:
        return [e.length for e in self.excursions]


def build_path(events: Sequence) -> CollectingPath:
    """Collecting path of (u, m) events; equal positions merge, zero masses vanish."""
    total: dict = {}
    W = 0
    for u, m in events:
        if m < 0:
            raise ValueError("negative mass")
        W = W + m
        if m > 0:
            u = u % 1
            total[u] = total.get(u, 0) + m
    if W >= 1:
        raise ValueError(f"total mass {W} must be < 1")
    pos = tuple(sorted(total))
    return CollectingPath(pos, tuple(total[p] for p in pos), W)


def argmin_point(path: CollectingPath) -> Real:
    """Smallest x in (0, 1] where S (taken with left limits) reaches its minimum."""
    best_x, best = 1, path.S1
    for x, c in zip(path.positions, path._cum):
        v = -x + c
        if v < best or (v == best and x < best_x):
            best_x, best = x, v
    return best_x


def bridge_argmin_point(path: CollectingPath, sign: int = -1) -> Real:
    """Smallest argmin of S_t + sign * S_1 * t over [0, 1] (left limits at jumps).

    ``sign=-1`` gives the bridge S_t - S_1 t, which starts and ends at 0.
    """
    slope = sign * path.S1
    best_x, best = 0, path.W - path.W
    for x, c in zip(path.positions, path._cum):
        v = -x + c + slope * x
        if v < best or (v == best and x < best_x):
            best_x, best = x, v
    end = path.S1 + slope
    if end < best:
        best_x = 1
    return best_x


def rot(a, f: Callable, fmin, f1) -> Callable:
    """Rot(a, f): read f from a to 1, then continue from 0, shifted so f(a) maps to f(a) - min f."""
    def g(x):
        if x <= 1 - a:
            return f(a + x) - fmin
        return f1 - fmin + f(x - (1 - a))
    return g


def rotate_at_argmin(path: CollectingPath, point: str = "a") -> tuple[Callable, Real]:
    """Rotated path accessor and rotation point.

    ``point="a"`` rotates S itself at the smallest argmin of S. ``point="bridge"``
    rotates the bridge S_t - S_1 t at its own argmin, which yields a nonnegative
    path with minimum 0 at 0 (the cycle-lemma form).
    """
    if path.S1 >= 0:
        raise ValueError("needs total mass < 1")
    if point == "a":
        a = argmin_point(path)
        fmin = path.left_limit(a) if a < 1 else path.S1
        return rot(a, path, fmin, path.S1), a
    if point == "bridge":
        a = bridge_argmin_point(path)
        S1 = path.S1
        f = lambda t: path(t) - S1 * t
        fmin = path.left_limit(a) - S1 * a if 0 < a < 1 else path.W - path.W
        return rot(a, f, fmin, path.W - path.W), a
    raise ValueError(f"unknown rotation point {point!r}")


def _rotated_jumps(path: CollectingPath, a):
    """Jumps in [a, a+1) in order, positions shifted to the unrolled line."""
    out = [(p, m) for p, m in zip(path.positions, path.jumps) if p >= a]
    out += [(p + 1, m) for p, m in zip(path.positions, path.jumps) if p < a]
    return out


def excursions_above_min(path: CollectingPath) -> ExcursionDecomposition:
    """Excursions of the extended path above its running minimum on [a, a+1).

    An excursion that returns to the minimum exactly at the next jump carries
    on through that jump: two closed blocks touching at a point are one block.
    """
    a = argmin_point(path)
    seq = _rotated_jumps(path, a)
    exc = []
    H = path.W - path.W
    pos = a
    start = None
    for x, m in seq:
        delta = x - pos
        if start is not None:
            if H < delta:
                exc.append(Excursion(start, pos + H - start, path.extended_left(start)))
                start = None
                H = H - H
            else:
                H = H - delta
        pos = x
        if start is None:
            start = x
        H = H + m
    if start is not None:
        delta = a + 1 - pos
        if H > delta:  # pragma: no cover - excluded by the choice of a
            raise RuntimeError("nonzero carry at the end of the period")
        end = pos + H
        if end == a + 1 and exc and exc[0].start == a:
            first = exc.pop(0)
            exc.append(Excursion(start, end - start + first.length, path.extended_left(start)))
        else:
            exc.append(Excursion(start, end - start, path.extended_left(start)))
    return ExcursionDecomposition(exc, a)


def reflected_integral(path: CollectingPath, lam=0) -> Real:
    """Exact integral over one period of T - min T, with T(x) = S(a+x) - S(a-) - lam x."""
    a = argmin_point(path)
    slope = 1 + lam
    H = path.W - path.W
    area = H
    pos = a
    for x, m in _rotated_jumps(path, a) + [(a + 1, 0)]:
        delta = x - pos
        if H >= slope * delta:
            area += delta * (H - slope * delta / 2)
            H = H - slope * delta
        else:
            area += H * H / (2 * slope)
            H = H - H
        pos = x
        H = H + m
    return area


def reflected_profile(path: CollectingPath, lam: float = 0.0, grid: int = 1025) -> np.ndarray:
    """Values of T - running min T at x = i/(grid-1), T as in ``reflected_integral``.

    At a jump location the right-continuous value is returned.
    """
    if grid < 2:
        raise ValueError("grid must be >= 2")
    a = float(argmin_point(path))
    slope = 1.0 + lam
    xs = np.linspace(0.0, 1.0, grid)
    out = np.empty(grid)
    seq = [(float(x) - a, float(m)) for x, m in _rotated_jumps(path, argmin_point(path))]
    H, pos, j = 0.0, 0.0, 0
    for i, x in enumerate(xs):
        while j < len(seq) and seq[j][0] <= x:
            H = max(H - slope * (seq[j][0] - pos), 0.0) + seq[j][1]
            pos = seq[j][0]
            j += 1
        out[i] = max(H - slope * (x - pos), 0.0)
    return out


def trapezoid(values: np.ndarray) -> float:
    h = 1.0 / (len(values) - 1)
    return float(h * (values.sum() - 0.5 * (values[0] + values[-1])))


# --- vectorised right-pushing ------------------------------------------------

def rdcs_blocks_batch(u: np.ndarray, masses: np.ndarray):
    """Right-pushing block structure for many independent arrival vectors.

    ``u`` has shape (T, k); ``masses`` shape (k,) or (T, k). Returns
    ``(lengths, starts)``: arrays of shape (T, k) holding each trial's block
    lengths and start positions in counterclockwise order from the first
    block found after the rotation point, zero padded on the right.
    """
    u = np.asarray(u, dtype=float)
    T, k = u.shape
    masses = np.broadcast_to(np.asarray(masses, dtype=float), (T, k))
    order = np.argsort(u, axis=1, kind="stable")
    x = np.take_along_axis(u, order, 1)
    m = np.take_along_axis(masses, order, 1)
    before = np.cumsum(m, axis=1) - m
    v = before - x
    S1 = m.sum(axis=1) - 1.0
    r = np.argmin(v, axis=1)
    r = np.where(v[np.arange(T), r] <= S1, r, 0)
    idx = (r[:, None] + np.arange(k)[None, :]) % k
    wrapped = (r[:, None] + np.arange(k)[None, :]) >= k
    V = np.take_along_axis(v, idx, 1) + np.where(wrapped, S1[:, None], 0.0)
    mr = np.take_along_axis(m, idx, 1)
    xr = np.take_along_axis(x, idx, 1)
    prev = np.minimum.accumulate(V, axis=1)
    newblock = np.ones((T, k), dtype=bool)
    newblock[:, 1:] = V[:, 1:] < prev[:, :-1]
    bid = np.cumsum(newblock, axis=1) - 1
    flat = (np.arange(T)[:, None] * k + bid).ravel()
    lengths = np.bincount(flat, weights=mr.ravel(), minlength=T * k).reshape(T, k)
    starts = np.zeros((T, k))
    rows, cols = np.nonzero(newblock)
    starts[rows, bid[rows, cols]] = xr[rows, cols]
    return lengths, starts


def labeled_from_blocks(lengths_row, starts_row) -> list:
    """Occupied lengths listed from the block that holds 0 (or precedes it)."""
    L = [l for l in lengths_row if l > 0]
    S = [float(s) % 1.0 for s in starts_row[: len(L)]]
    b = len(L)
    i0 = None
    for i in range(b):
        if S[i] + L[i] >= 1.0 or S[i] == 0.0:
            i0 = i
            break
    if i0 is None:
        i0 = max(range(b), key=lambda i: S[i])
    return L[i0:] + L[:i0]
