"""Unitary insertion costs, total cost over a parking run, and the insertion measure."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .discrete import ParkingState, park, phase_time, total_displacement_from_counts


def _exit_moments(s: int, p: float) -> tuple[np.ndarray, np.ndarray]:
    """First and second moments of the exit time of {0..s-1} (start at each site).

    The walk steps +1 with probability p and -1 otherwise; it stops on
    reaching -1 or s.
    """
    q = 1.0 - p
    ab = np.zeros((3, s))
    ab[0, 1:] = -p
    ab[1, :] = 1.0
    ab[2, :-1] = -q
    m1 = solve_banded((1, 1), ab, np.ones(s))
    # E[T^2] = 1 + 2 E[T'] + E[T'^2] averaged over the next site
    nb = np.zeros(s)
    nb[:-1] += p * m1[1:]
    nb[1:] += q * m1[:-1]
    m2 = solve_banded((1, 1), ab, 1.0 + 2.0 * nb)
    return m1, m2


class UnitaryCostModel:
    name = "model"

    def alpha(self, n: int) -> float:
        return float(n)

    def psi(self, s: int) -> float:
        raise NotImplementedError

    def var(self, s: int) -> float:
        raise NotImplementedError

    def psi_inf(self, t: float) -> float:
        raise NotImplementedError

    def sample(self, s: int, rng) -> float:
        raise NotImplementedError

    def sample_many(self, sizes: np.ndarray, rng) -> np.ndarray:
        return np.array([self.sample(int(s), rng) for s in sizes], dtype=float)

    def __repr__(self):
        return self.name


class StandardParking(UnitaryCostModel):
    """1 + U with U uniform on {0..s-1}; one try when the chosen slot is free."""

    name = "standard"

    def psi(self, s):
        return (s + 1) / 2 if s >= 1 else 1.0

    def var(self, s):
        return (s * s - 1) / 12 if s >= 1 else 0.0

    def psi_inf(self, t):
        return t / 2

    def sample(self, s, rng):
        return 1.0 + float(rng.integers(0, s)) if s > 0 else 1.0

    def sample_many(self, sizes, rng):
        sizes = np.asarray(sizes)
        u = np.floor(rng.random(sizes.size) * np.maximum(sizes, 1))
        return np.where(sizes > 0, 1.0 + u, 1.0)

    @staticmethod
    def realized(displacement: int) -> float:
        """Tries actually made by a car displaced by d slots."""
        return 1.0 + displacement


class ClosestPlace(UnitaryCostModel):
    """1 + min(U, s-U) with U uniform on {0..s}."""

    name = "closest"

    def _values(self, s):
        u = np.arange(s + 1)
        return 1.0 + np.minimum(u, s - u)

    def psi(self, s):
        return float(self._values(s).mean())

    def var(self, s):
        return float(self._values(s).var())

    def psi_inf(self, t):
        return t / 4

    def sample(self, s, rng):
        u = int(rng.integers(0, s + 1))
        return 1.0 + min(u, s - u)

    def sample_many(self, sizes, rng):
        sizes = np.asarray(sizes)
        u = np.floor(rng.random(sizes.size) * (sizes + 1))
        return 1.0 + np.minimum(u, sizes - u)


class _WalkModel(UnitaryCostModel):
    p = 0.5

    def _simulate(self, s, rng, chunk=4096):
        x = int(rng.integers(0, s))
        t = 0
        while True:
            steps = np.where(rng.random(chunk) < self.p, 1, -1)
            path = x + np.cumsum(steps)
            out = np.flatnonzero((path < 0) | (path >= s))
            if out.size:
                return float(t + out[0] + 1)
            x = int(path[-1])
            t += chunk

    def sample(self, s, rng):
        return self._simulate(s, rng) if s > 0 else 1.0

    def var(self, s):
        if s == 0:
            return 0.0
        m1, m2 = _exit_moments(s, self.p)
        return float(m2.mean() - m1.mean() ** 2)


class PWalk(_WalkModel):
    """Exit time of the occupied run for a walk stepping right with probability p > 1/2."""

    def __init__(self, p: float = 0.75):
        if not 0.5 < p <= 1:
            raise ValueError("p must lie in (1/2, 1]")
        self.p = p
        self.name = f"pwalk({p})"

    def psi(self, s):
        if s == 0:
            return 1.0
        p, q, N = self.p, 1.0 - self.p, s + 1
        y = np.arange(1, N)
        if q == 0:
            return float((N - y).mean())
        r = q / p
        # gambler's ruin: expected duration from y with absorbing 0 and N
        d = (N * (1 - r**y) / (1 - r**N) - y) / (p - q)
        return float(d.mean())

    def psi_inf(self, t):
        return t / (2 * (2 * self.p - 1))


class SymmetricWalk(_WalkModel):
    """Exit time of the occupied run for a simple symmetric walk."""

    name = "symwalk"
    p = 0.5

    def alpha(self, n):
        return float(n) ** 2

    def psi(self, s):
        # mean of y (s + 1 - y) over y = 1..s
        return (s + 1) * (s + 2) / 6 if s > 0 else 1.0

    def psi_inf(self, t):
        return t * t / 6


def make_cost_model(spec) -> UnitaryCostModel:
    if isinstance(spec, UnitaryCostModel):
        return spec
    name, _, arg = str(spec).lower().partition(":")
    if name == "standard":
        return StandardParking()
    if name == "closest":
        return ClosestPlace()
    if name == "pwalk":
        return PWalk(float(arg) if arg else 0.75)
    if name in ("symwalk", "symmetric"):
        return SymmetricWalk()
    raise ValueError(f"unknown cost model {spec!r}")


def total_cost(state: ParkingState, model: UnitaryCostModel, rng=None, upto: int | None = None) -> float:
    """Sum of unitary costs over the first ``upto`` insertions.

    Standard parking without an RNG uses the tries actually made (1 + d);
    otherwise costs are drawn independently given the insertion sizes.
    """
    sizes = state.insertion_sizes[:upto]
    if not sizes:
        return 0.0
    if rng is None:
        if not isinstance(model, StandardParking):
            raise ValueError("an RNG is needed to draw costs for this model")
        return float(sum(model.realized(d) for d in state.displacements[:upto]))
    return float(model.sample_many(np.asarray(sizes), rng).sum())


@dataclass
class InsertionMeasure:
    counts: Counter
    n: int
    t: int

    def pair(self, f: Callable[[float], float], eps: float = 0.0) -> float:
        """<f, Theta> = n^{-1/2} sum_j f(s_j / n), sizes 0 excluded, sizes below eps*n dropped."""
        tot = 0.0
        for s, c in self.counts.items():
            x = s / self.n
            if s > 0 and x >= eps:
                tot += c * f(x)
        return tot / math.sqrt(self.n)


def theta_measure(state: ParkingState, upto: int | None = None) -> InsertionMeasure:
    sizes = state.insertion_sizes[:upto]
    return InsertionMeasure(Counter(sizes), state.n, len(sizes))


def insertion_size_pmf(n: int, m: int, k: int) -> Fraction:
    """P(s_m = k): insertion size seen by the car arriving after m parked cars."""
    if not (0 <= k <= m < n):
        raise ValueError("need 0 <= k <= m < n")
    if k == 0:
        return Fraction(n - m, n)
    if m == n - 1:
        return Fraction(int(k == n - 1) * (n - 1), n)
    pb = math.comb(m, k) * Fraction(k + 1, n) ** k * (1 - Fraction(k + 1, n)) ** (m - k)
    return pb * Fraction(n - 1 - m, n - k - 1) * Fraction(k, k + 1)


def scaled_cost_experiment(n: int, lam: float, model: UnitaryCostModel, trials: int,
                           seed: int, realized: bool = False) -> np.ndarray:
    """Cost(t_n(lam)) / (sqrt(n) alpha_n) for independent trials.

    ``realized=True`` (standard parking only) uses the displacement sum d_1+...+d_t
    computed from slot counts, which is order independent and fast.
    """
    from .harness import trial_rng
    t = phase_time(n, lam)
    out = np.empty(trials)
    scale = math.sqrt(n) * model.alpha(n)
    for i in range(trials):
        rng = trial_rng(seed, i)
        choices = rng.integers(0, n, size=t)
        if realized:
            cost = total_displacement_from_counts(np.bincount(choices, minlength=n))
        else:
            state = park(n, choices.tolist())
            cost = total_cost(state, model, trial_rng(seed, i, 1))
        out[i] = cost / scale
    return out
