"""Grid models on C_n = {0, 1/n, ..., (n-1)/n}.

Grid configurations live on the exact rational backend: a block [a/n, b/n]
covers the grid points a..b, so a block built from c unit masses holds c+1
points. The parking cluster of slots {a, ..., b-1} is the same object as the
block [a/n, b/n].
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .circle import Arc, OccupiedConfig, make_config
from .policies import RDCS, MassEvent, Phase, Policy, disperse_sequence, relax


@dataclass(frozen=True)
class DiscreteConfig:
    n: int
    occupied: OccupiedConfig = field(default_factory=OccupiedConfig)

    def __post_init__(self):
        for c in self.occupied.components:
            if not (_on_grid(c.start, self.n) and _on_grid(c.length, self.n)):
                raise ValueError(f"arc {c} is not on the 1/{self.n} grid")

    @property
    def N(self) -> int:
        return self.occupied.N


def _on_grid(x, n: int) -> bool:
    return isinstance(x, (int, Fraction)) and (Fraction(x) * n).denominator == 1


class ParticleDispersion(Policy):
    """Mass c/n split into c particles; each walks +-1 on the block's grid points from u
    and settles on the first free point it reaches."""

    deterministic = False

    def __init__(self, n: int):
        self.n = n
        self.name = f"particle({n})"

    def mover(self, u, a, b, m, free, rng):
        return _Particles(self.n, rng)


def particle_right_probability(a, b, n: int) -> Fraction:
    """Chance that a +-1 walk from u leaves [u-a, u+b] on the right."""
    return Fraction(int(a * n) + 1, int((a + b) * n) + 2)


class _Particles:
    def __init__(self, n, rng):
        self.n, self.rng = n, rng
        self.unit = Fraction(1, n)

    def step(self, a, b, gl, gr, rem):
        zero = Fraction(0)
        if self.rng.random() < particle_right_probability(a, b, self.n):
            return Phase(zero, self.unit, False, gr == self.unit, rem == self.unit)
        return Phase(self.unit, zero, gl == self.unit, False, rem == self.unit)


def _check_grid_event(ev, n):
    u, m = ev
    if not (_on_grid(u, n) and _on_grid(m, n)):
        raise ValueError(f"event {ev} is not on the 1/{n} grid")
    return MassEvent(Fraction(u) % 1, Fraction(m))


def discrete_relax(cfg: DiscreteConfig, ev, policy: Policy, rng=None) -> DiscreteConfig:
    ev = _check_grid_event(ev, cfg.n)
    new, _ = relax(cfg.occupied, ev, policy, rng)
    return DiscreteConfig(cfg.n, new)


def particle_outcomes(cfg: DiscreteConfig, ev) -> dict:
    """Exact law of the configuration after a particle dispersion: {config: probability}."""
    n = cfg.n
    u, m = _check_grid_event(ev, n)
    unit = Fraction(1, n)
    if m == 0:
        return {discrete_relax(cfg, (u, m), RDCS()).occupied: Fraction(1)}
    law = {cfg.occupied: Fraction(1)}
    for _ in range(int(m * n)):
        nxt: dict = {}
        for occ, p in law.items():
            i = occ.locate(u)
            if i is None:
                pr = Fraction(1, 2)
            else:
                c = occ.components[i]
                a = (u - c.start) % 1
                pr = particle_right_probability(a, c.length - a, n)
            for go_right, q in ((True, pr), (False, 1 - pr)):
                if q == 0:
                    continue
                side = _RIGHT if go_right else _LEFT
                res, _ = relax(occ, MassEvent(u, unit), side, None)
                res = OccupiedConfig(res.components, occ.step)
                nxt[res] = nxt.get(res, 0) + p * q
        law = nxt
    return {OccupiedConfig(occ.components, cfg.occupied.step + 1): p for occ, p in law.items()}


class _Fixed(Policy):
    def __init__(self, right):
        from .policies import _Left, _Right
        self._cls = _Right if right else _Left

    def mover(self, u, a, b, m, free, rng):
        return self._cls()


_RIGHT, _LEFT = _Fixed(True), _Fixed(False)


# --- parking ----------------------------------------------------------------

@dataclass
class ParkingState:
    n: int
    occupied_slots: bytearray
    displacements: list
    insertion_sizes: list

    @property
    def cars(self) -> int:
        return len(self.displacements)

    def cost(self, k: int | None = None) -> int:
        return sum(self.displacements[:k])


def park(n: int, choices: Sequence[int]) -> ParkingState:
    """Linear probing: each car takes the first free slot clockwise from its choice."""
    if len(choices) > n:
        raise ValueError("more cars than slots")
    parent = list(range(n))
    size = [0] * n
    first = list(range(n))
    occ = bytearray(n)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(left, right):
        # right cluster hangs under the left one, which keeps its first slot
        rl, rr = find(left), find(right)
        if rl != rr:
            parent[rr] = rl
            size[rl] += size[rr]

    disp, sizes = [], []
    for c in choices:
        if not 0 <= c < n:
            raise ValueError(f"choice {c} outside [0, {n})")
        if occ[c]:
            r = find(c)
            s = size[r]
            slot = (first[r] + s) % n
            disp.append((slot - c) % n)
            sizes.append(s)
        else:
            slot = c
            disp.append(0)
            sizes.append(0)
        occ[slot] = 1
        size[slot] = 1
        first[slot] = slot
        left, right = (slot - 1) % n, (slot + 1) % n
        if occ[left] and find(left) != find(slot):
            union(left, slot)
        if occ[right] and find(right) != find(slot):
            union(slot, right)
    return ParkingState(n, occ, disp, sizes)


def parking_to_config(state: ParkingState) -> OccupiedConfig:
    """Occupied slots as closed blocks [a/n, b/n] for each run {a, ..., b-1}."""
    n = state.n
    return make_config(
        (Arc(Fraction(a, n), Fraction(length, n)) for a, length in cyclic_runs(state.occupied_slots)),
        state.cars,
    )


def cyclic_runs(occupied) -> list[tuple[int, int]]:
    """Maximal runs of occupied slots on the cycle as (first slot, length)."""
    occ = np.asarray(occupied, dtype=bool)
    n = occ.size
    if occ.all():
        return [(0, n)]
    if not occ.any():
        return []
    # rotate so that slot 0 of the rolled array is free
    z = int(np.flatnonzero(~occ)[0])
    rolled = np.roll(occ, -z).astype(np.int8)
    edges = np.diff(np.concatenate(([0], rolled, [0])))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    return [(int((s + z) % n), int(e - s)) for s, e in zip(starts, ends)]


def occupancy_from_counts(counts: np.ndarray) -> np.ndarray:
    """Occupied slots after parking cars with the given per-slot choice counts.

    The final occupancy does not depend on arrival order. With X the partial
    sums of (count - 1) read from just after the global minimum, a slot is
    empty exactly when it sets a new strict minimum.
    """
    counts = np.asarray(counts, dtype=np.int64)
    n = counts.size
    if counts.sum() > n:
        raise ValueError("more cars than slots")
    X = np.cumsum(counts - 1)
    r = int(np.argmin(X))
    order = (np.arange(n) + r + 1) % n
    Y = np.cumsum(counts[order] - 1)
    prev_min = np.minimum.accumulate(np.concatenate(([0], Y)))[:-1]
    empty_rot = Y < prev_min
    occ = np.ones(n, dtype=bool)
    occ[order[empty_rot]] = False
    return occ


def total_displacement_from_counts(counts: np.ndarray) -> int:
    """Sum of displacements, i.e. the number of cars crossing each slot boundary."""
    counts = np.asarray(counts, dtype=np.int64)
    n = counts.size
    X = np.cumsum(counts - 1)
    r = int(np.argmin(X))
    order = (np.arange(n) + r + 1) % n
    Y = np.cumsum(counts[order] - 1)
    carry = Y - np.minimum(np.minimum.accumulate(Y), 0)
    return int(carry.sum())


def bulldozer_park(n: int, arrivals: Sequence) -> OccupiedConfig:
    """RDCS with masses 1/n at the given positions."""
    exact = all(isinstance(u, (int, Fraction)) for u in arrivals)
    w = Fraction(1, n) if exact else 1.0 / n
    final, _, _ = disperse_sequence([(u, w) for u in arrivals], RDCS())
    return final


def coupled_slots(arrivals, n: int) -> np.ndarray:
    """Slot index ceil(n U) mod n for each arrival."""
    if all(isinstance(u, (int, Fraction)) for u in np.atleast_1d(arrivals)):
        return np.array([math.ceil(Fraction(u) * n) % n for u in arrivals], dtype=np.int64)
    u = np.asarray(arrivals, dtype=float)
    return (np.ceil(n * u).astype(np.int64)) % n


def couple_discrete(arrivals, n: int) -> list:
    """Grid points ceil(n U)/n, with 1 sent to 0."""
    return [Fraction(int(j), n) for j in coupled_slots(arrivals, n)]


def phase_time(n: int, lam: float) -> int:
    """t_n(lambda) = floor(n - lambda sqrt(n))."""
    return int(math.floor(n - lam * math.sqrt(n)))


def config_block_counts(cfg: OccupiedConfig, n: int) -> list[int]:
    """Number of grid cells (unit masses) in each block, largest first."""
    return sorted((int(round(float(c.length) * n)) for c in cfg.components), reverse=True)


def grid_words(n: int, k: int):
    """All n**k arrival words as tuples of grid indices."""
    import itertools
    return itertools.product(range(n), repeat=k)


def count_blocks(occupied) -> int:
    return len(cyclic_runs(occupied))


def insertion_histogram(state: ParkingState) -> Counter:
    return Counter(state.insertion_sizes)
