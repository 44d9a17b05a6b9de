"""Points, closed arcs and occupied configurations on the circle R/Z.

Coordinates may be floats or ``fractions.Fraction``; every routine here is
written against the common arithmetic of both, so the same code serves the
float backend and the exact rational backend used for grid models.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence, Union

Real = Union[float, Fraction]


def wrap(x: Real) -> Real:
    """Canonical representative of ``x`` in [0, 1)."""
    y = x % 1
    # -1e-17 % 1.0 rounds up to 1.0
    if y >= 1:
        y = y - y
    return y


def dist_pos(a: Real, b: Real) -> Real:
    """Distance travelled from ``a`` to ``b`` in the positive direction."""
    return wrap(b - a)


class Arc(NamedTuple):
    """Closed arc [start, start + length] read counterclockwise; may wrap past 0."""

    start: Real
    length: Real

    @property
    def end(self) -> Real:
        return wrap(self.start + self.length)

    def contains(self, x: Real) -> bool:
        return dist_pos(self.start, x) <= self.length

    def rotate(self, alpha: Real) -> "Arc":
        return Arc(wrap(self.start + alpha), self.length)


def overlap(a: Arc, b: Arc) -> Real:
    """Lebesgue measure of the intersection of two arcs."""
    d = dist_pos(a.start, b.start)
    zero = a.length - a.length
    head = max(zero, min(a.length, d + b.length) - d) if d <= a.length else zero
    tail = max(zero, min(a.length, d + b.length - 1))
    return head + tail


@dataclass(frozen=True)
class BlockLabeling:
    occupied_starts: list
    occupied_lengths: list
    free_lengths: list
    shift: Real


@dataclass(frozen=True)
class OccupiedConfig:
    """Disjoint closed arcs sorted by start, plus the number of masses dispersed."""

    components: tuple = ()
    step: int = 0

    @property
    def N(self) -> int:
        return len(self.components)

    def measure(self) -> Real:
        return sum((c.length for c in self.components), 0)

    def lengths(self) -> list:
        return [c.length for c in self.components]

    def locate(self, x: Real) -> int | None:
        """Index of the component containing ``x`` (boundaries count as inside)."""
        for i, c in enumerate(self.components):
            if dist_pos(c.start, x) <= c.length:
                return i
        return None

    def rotate(self, alpha: Real) -> "OccupiedConfig":
        return make_config((c.rotate(alpha) for c in self.components), self.step)

    def check(self) -> None:
        """Raise if components overlap, touch, or are unsorted."""
        comps = self.components
        for c in comps:
            if not (0 <= c.start < 1) or c.length < 0:
                raise ValueError(f"malformed arc {c}")
        if list(comps) != sorted(comps, key=lambda c: c.start):
            raise ValueError("components not sorted")
        if len(comps) == 1 and comps[0].length >= 1:
            raise ValueError("component covers the circle")
        if len(comps) >= 2:
            for i, c in enumerate(comps):
                nxt = comps[(i + 1) % len(comps)]
                if dist_pos(c.start, nxt.start) <= c.length:
                    raise ValueError(f"components {c} and {nxt} intersect")

    def to_dict(self) -> dict:
        return {
            "components": [
                {"start": _num_out(c.start), "length": _num_out(c.length)}
                for c in self.components
            ],
            "step": self.step,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OccupiedConfig":
        try:
            arcs = [Arc(wrap(_num_in(c["start"])), _num_in(c["length"])) for c in d["components"]]
            step = int(d.get("step", 0))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"bad configuration record: {exc}") from exc
        cfg = make_config(arcs, step)
        cfg.check()
        return cfg


def _num_out(x):
    return f"{x.numerator}/{x.denominator}" if isinstance(x, Fraction) else x


def _num_in(x):
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise TypeError(f"not a number: {x!r}")
    return x


def make_config(arcs, step: int = 0) -> OccupiedConfig:
    return OccupiedConfig(tuple(sorted(arcs, key=lambda c: c.start)), step)


def insert_covered_arc(cfg: OccupiedConfig, arc: Arc) -> tuple[OccupiedConfig, list]:
    """Union of ``cfg`` with a closed arc.

    Returns the new configuration and the old components that were absorbed,
    in counterclockwise order.
    """
    if arc.length > 1 or arc.length < 0:
        raise ValueError(f"arc length {arc.length} outside [0, 1]")
    L = arc.length
    lo, hi = L - L, L
    lo_start = arc.start
    absorbed, kept = [], []
    for c in cfg.components:
        d = dist_pos(arc.start, c.start)
        head = d <= L
        tail = d + c.length >= 1
        if head and tail:
            raise ValueError("union would cover the whole circle")
        if head:
            absorbed.append((d, c))
            hi = max(hi, d + c.length)
        elif tail:
            off = d - 1
            absorbed.append((off, c))
            hi = max(hi, off + c.length)
            if off < lo:
                lo, lo_start = off, c.start
        else:
            kept.append(c)
    if hi - lo >= 1:
        raise ValueError("union would cover the whole circle")
    absorbed.sort(key=lambda p: p[0])
    merged = Arc(lo_start, hi - lo)
    return make_config(kept + [merged], cfg.step), [c for _, c in absorbed]


def free_components(cfg: OccupiedConfig) -> list[tuple]:
    """Open complementary arcs as (start, length), in counterclockwise order."""
    comps = cfg.components
    if not comps:
        return [(0.0, 1.0)]
    if len(comps) == 1:
        c = comps[0]
        return [(c.end, 1 - c.length)]
    out = []
    for i, c in enumerate(comps):
        nxt = comps[(i + 1) % len(comps)]
        out.append((c.end, dist_pos(c.start, nxt.start) - c.length))
    return out


def origin_block(cfg: OccupiedConfig) -> int:
    """Index of O_0: the component containing 0, else the last one before 0."""
    if not cfg.components:
        raise ValueError("empty configuration has no blocks")
    i = cfg.locate(0 * cfg.components[0].start)
    return len(cfg.components) - 1 if i is None else i


def label_blocks(cfg: OccupiedConfig) -> BlockLabeling:
    i0 = origin_block(cfg)
    comps = cfg.components
    order = list(comps[i0:]) + list(comps[:i0])
    free = free_components(cfg)
    free = free[i0:] + free[:i0]
    return BlockLabeling(
        occupied_starts=[c.start for c in order],
        occupied_lengths=[c.length for c in order],
        free_lengths=[f[1] for f in free],
        shift=dist_pos(order[0].start, 0 * order[0].start),
    )


def rotated_lengths(cfg: OccupiedConfig) -> list:
    """Occupied lengths listed from O_0 on."""
    return label_blocks(cfg).occupied_lengths


def config_from_pairs(pairs: Sequence[tuple], step: int = 0) -> OccupiedConfig:
    """Build a checked configuration from (start, length) pairs."""
    cfg = make_config((Arc(wrap(s), l) for s, l in pairs), step)
    cfg.check()
    return cfg
