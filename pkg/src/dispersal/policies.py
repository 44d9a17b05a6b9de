"""Interval relaxation policies and the event-driven engine that runs them.

A policy never moves time forward by small steps. Each call to a mover's
``step`` returns one phase: how much the growing arc extends on the left and
on the right before something happens (a collision with a neighbour, the
mass running out, or a policy-internal switch). The engine applies the
phase, absorbs neighbours that were reached, and asks for the next phase.

The arc state handed to movers is ``(a, b)``: distances from the arrival
point ``u`` to the left and right ends of the growing block, together with
the gaps ``gl``/``gr`` to the neighbouring components and the mass ``rem``
still to deposit.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

from .circle import Arc, OccupiedConfig, Real, dist_pos, make_config, overlap, wrap

INF = math.inf


class MassEvent(NamedTuple):
    u: Real
    m: Real


@dataclass(frozen=True)
class MassVector:
    masses: tuple

    def __post_init__(self):
        if any(m < 0 for m in self.masses):
            raise ValueError("masses must be non-negative")
        if self.W >= 1:
            raise ValueError(f"total mass {self.W} must be < 1")

    @property
    def W(self) -> Real:
        return sum(self.masses, 0)

    @property
    def R(self) -> Real:
        return 1 - self.W

    def __len__(self) -> int:
        return len(self.masses)


class Phase(NamedTuple):
    dl: Real
    dr: Real
    hit_left: bool
    hit_right: bool
    done: bool


@dataclass
class RelaxationTrace:
    initial_component: Arc | None
    events: list = field(default_factory=list)      # (time, absorbed arc)
    final_arc: Arc | None = None
    samples: list = field(default_factory=list)     # (time, growing arc)


def _zero(x):
    return x - x


def _grow_right(gr, budget, rem=None) -> Phase:
    rem = budget if rem is None else rem
    d = min(gr, budget)
    return Phase(_zero(budget), d, False, d == gr, d == rem)


def _grow_left(gl, budget, rem=None) -> Phase:
    rem = budget if rem is None else rem
    d = min(gl, budget)
    return Phase(d, _zero(budget), d == gl, False, d == rem)


# --- movers -----------------------------------------------------------------

class _Right:
    def step(self, a, b, gl, gr, rem):
        return _grow_right(gr, rem)


class _Left:
    def step(self, a, b, gl, gr, rem):
        return _grow_left(gl, rem)


class _Split:
    """Deposit ``r`` on the right first, then ``l`` on the left."""

    def __init__(self, r, l):
        self.r, self.l = r, l

    def step(self, a, b, gl, gr, rem):
        if self.r > 0:
            d = min(gr, self.r)
            self.r = _zero(d) if d == self.r else self.r - d
            return Phase(_zero(d), d, False, d == gr, self.r <= 0 and self.l <= 0)
        d = min(gl, self.l)
        self.l = _zero(d) if d == self.l else self.l - d
        return Phase(d, _zero(d), d == gl, False, self.l <= 0)


class _Reeval:
    """Nearer side grows alone until both ends are equidistant from u, then both at half speed."""

    def __init__(self, exact: bool):
        self.tol = 0 if exact else 1e-12

    def step(self, a, b, gl, gr, rem):
        if b - a > self.tol:
            d = min(gl, b - a, rem)
            return Phase(d, _zero(d), d == gl, False, d == rem)
        if a - b > self.tol:
            d = min(gr, a - b, rem)
            return Phase(_zero(d), d, False, d == gr, d == rem)
        return _both_halves(gl, gr, rem)


def _both_halves(gl, gr, rem) -> Phase:
    tau = min(2 * gl, 2 * gr, rem)
    hl, hr = tau == 2 * gl, tau == 2 * gr
    dl = gl if hl else tau / 2
    dr = gr if hr else tau / 2
    return Phase(dl, dr, hl, hr, tau == rem)


class _Fluid:
    """Side speeds proportional to the opposite distance; a^2 - b^2 is conserved."""

    def step(self, a, b, gl, gr, rem):
        s = a + b
        D = a * a - b * b
        if a == b:
            return _both_halves(gl, gr, rem)
        a, b, s, D = float(a), float(b), float(s), float(D)
        A, B = a + gl, b + gr
        tl = A + math.sqrt(A * A - D) - s if gl < INF else INF
        tr = B + math.sqrt(B * B + D) - s if gr < INF else INF
        tau = min(tl, tr, rem)
        if tau == tl:
            dr = min(max(tl - gl, 0.0), gr)
            return Phase(gl, dr, True, dr == gr and tl == tr, tl >= rem)
        if tau == tr:
            dl = min(max(tr - gr, 0.0), gl)
            return Phase(dl, gr, dl == gl and tl == tr, True, tr >= rem)
        dl, dr = fluid_increments(a, b, rem)
        return Phase(min(dl, gl), min(dr, gr), False, False, True)


def fluid_increments(a0, b0, t):
    y = a0 + b0 + t
    D = a0 * a0 - b0 * b0
    dl = y / 2 + D / (2 * y) - a0
    dl = min(max(dl, 0.0), t)
    return dl, t - dl


def fluid_boundaries(a0: float, b0: float, t: float) -> tuple[float, float]:
    """Left and right distances from the arrival point after depositing ``t``."""
    if a0 < 0 or b0 < 0 or t < 0:
        raise ValueError("arguments must be non-negative")
    y = a0 + b0 + t
    if y == 0:
        return 0.0, 0.0
    D = a0 * a0 - b0 * b0
    return y / 2 + D / (2 * y), y / 2 - D / (2 * y)


class _Jam:
    """Fresh random split fraction at every phase."""

    def __init__(self, rng):
        self.rng = rng

    def step(self, a, b, gl, gr, rem):
        q = self.rng.random()
        tl = gl / (1 - q) if q < 1 else INF
        tr = gr / q if q > 0 else INF
        tau = min(tl, tr, rem)
        if tau == rem:
            dl = min((1 - q) * rem, gl)
            return Phase(dl, min(rem - dl, gr), False, False, True)
        if tl <= tr:
            return Phase(gl, min(q * tl, gr), True, tl == tr, False)
        return Phase(min((1 - q) * tr, gl), gr, tl == tr, True, False)


class _Range:
    """Range of a walk with spatial step h; extensions chosen by gambler's ruin."""

    def __init__(self, h, rng):
        self.h, self.rng = h, rng
        self.w = 0.0

    def step(self, a, b, gl, gr, rem):
        el = min(self.h, gl, rem)
        er = min(self.h, gr, rem)
        p_right = (self.w + a + el) / (a + b + el + er)
        if self.rng.random() < p_right:
            self.w = b + er
            return Phase(0.0, er, False, er == gr, er == rem)
        self.w = -(a + el)
        return Phase(el, 0.0, el == gl, False, el == rem)


class _Barrier:
    """Grow right up to the next multiple of 1/G, then left.  Breaks rotation invariance."""

    def __init__(self, u, b0, grid):
        right = float(u) + float(b0)
        nxt = (math.floor(right * grid) + 1) / grid
        self.target = float(b0) + (nxt - right)

    def step(self, a, b, gl, gr, rem):
        room = self.target - b
        if room > 0:
            d = min(gr, room, rem)
            return Phase(0.0, d, False, d == gr, d == rem)
        return _grow_left(gl, rem)


# --- policies ---------------------------------------------------------------

class Policy:
    name = "policy"
    deterministic = True
    valid = True

    def mover(self, u, a, b, m, free: bool, rng):
        raise NotImplementedError

    def __repr__(self):
        return self.name


class RDCS(Policy):
    name = "rdcs"

    def mover(self, u, a, b, m, free, rng):
        return _Right()


class LDCS(Policy):
    name = "ldcs"

    def mover(self, u, a, b, m, free, rng):
        return _Left()


class PSplit(Policy):
    def __init__(self, p: Real = 0.5):
        if not 0 <= p <= 1:
            raise ValueError("p must lie in [0, 1]")
        self.p = p
        self.name = f"psplit({p})"

    def mover(self, u, a, b, m, free, rng):
        r = self.p * m
        return _Split(r, m - r)


class RandomDir(Policy):
    deterministic = False

    def __init__(self, p: float = 0.5):
        if not 0 <= p <= 1:
            raise ValueError("p must lie in [0, 1]")
        self.p = p
        self.name = f"randomdir({p})"

    def mover(self, u, a, b, m, free, rng):
        return _Right() if rng.random() < self.p else _Left()


class ClosestSide(Policy):
    name = "closest"

    def mover(self, u, a, b, m, free, rng):
        if free:
            return _Split(m / 2, m - m / 2)
        return _Left() if a < b else _Right()


class ClosestSideReeval(Policy):
    name = "closest_reeval"

    def mover(self, u, a, b, m, free, rng):
        return _Reeval(isinstance(m, Fraction))


class FluidParticle(Policy):
    name = "fluid"

    def mover(self, u, a, b, m, free, rng):
        return _Fluid()


class BrownianRange(Policy):
    deterministic = False

    def __init__(self, h: float = 1e-3):
        if not h > 0:
            raise ValueError("h must be positive")
        self.h = h
        self.name = f"brownian({h})"

    def mover(self, u, a, b, m, free, rng):
        return _Range(self.h, rng)


class JamSpreader(Policy):
    name = "jam"
    deterministic = False

    def mover(self, u, a, b, m, free, rng):
        return _Jam(rng)


class BarrierStop(Policy):
    """Negative control: unit speed and local, but anchored to fixed barriers."""

    valid = False

    def __init__(self, grid: int = 4):
        if grid < 1:
            raise ValueError("grid must be >= 1")
        self.grid = grid
        self.name = f"barrier({grid})"

    def mover(self, u, a, b, m, free, rng):
        return _Barrier(u, b, self.grid)


_SIMPLE = {
    "rdcs": RDCS, "ldcs": LDCS, "closest": ClosestSide, "closestside": ClosestSide,
    "closest_reeval": ClosestSideReeval, "reeval": ClosestSideReeval,
    "fluid": FluidParticle, "jam": JamSpreader,
}


def make_policy(spec) -> Policy:
    """Build a policy from ``"psplit:0.3"``-style strings or ``{"policy": ..., "p": ...}``."""
    if isinstance(spec, Policy):
        return spec
    params = {}
    if isinstance(spec, dict):
        params = dict(spec)
        name = str(params.pop("policy", "")).lower()
    else:
        name, _, arg = str(spec).lower().partition(":")
        if arg:
            params["arg"] = float(arg)
    arg = params.get("arg")
    if name in _SIMPLE:
        return _SIMPLE[name]()
    if name == "psplit":
        return PSplit(params.get("p", 0.5 if arg is None else arg))
    if name in ("randomdir", "random"):
        return RandomDir(params.get("p", 0.5 if arg is None else arg))
    if name in ("brownian", "range"):
        return BrownianRange(params.get("h", 1e-3 if arg is None else arg))
    if name == "barrier":
        return BarrierStop(int(params.get("grid", 4 if arg is None else arg)))
    raise ValueError(f"unknown policy {spec!r}")


# --- engine -----------------------------------------------------------------

def relax(cfg: OccupiedConfig, ev: MassEvent, policy: Policy, rng=None,
          record: bool = False) -> tuple[OccupiedConfig, RelaxationTrace]:
    """Disperse one mass into ``cfg`` and return the new configuration and its trace."""
    u, m = ev
    u = wrap(u)
    if m < 0:
        raise ValueError("negative mass")
    if cfg.measure() + m >= 1:
        raise ValueError("total mass would reach 1")
    comps = cfg.components
    idx = cfg.locate(u)
    if idx is None:
        j = bisect_right([c.start for c in comps], u)
        others = list(comps[j:]) + list(comps[:j])
        start = right_end = u
        a = b = _zero(m)
        initial = None
        if m == 0:
            point = Arc(u, _zero(m))
            trace = RelaxationTrace(None, [], point, [(m, point)] if record else [])
            return make_config(list(comps) + [point], cfg.step + 1), trace
    else:
        initial = comps[idx]
        others = list(comps[idx + 1:]) + list(comps[:idx])
        start, right_end = initial.start, initial.end
        a = dist_pos(start, u)
        b = initial.length - a
        if m == 0:
            trace = RelaxationTrace(initial, [], initial, [(m, initial)] if record else [])
            return OccupiedConfig(comps, cfg.step + 1), trace

    mover = policy.mover(u, a, b, m, idx is None, rng)
    trace = RelaxationTrace(initial)
    used = _zero(m)
    rem = m
    for _ in range(10_000_000):
        if others:
            gr = dist_pos(right_end, others[0].start)
            gl = dist_pos(others[-1].end, start)
        else:
            gl = gr = INF
        ph = mover.step(a, b, gl, gr, rem)
        if ph.dl < 0 or ph.dr < 0 or ph.dl > gl or ph.dr > gr:
            raise RuntimeError(f"{policy} produced an invalid phase {ph}")
        if ph.dl:
            a += ph.dl
            start = wrap(start - ph.dl)
        if ph.dr:
            b += ph.dr
            right_end = wrap(right_end + ph.dr)
        used += ph.dl + ph.dr
        rem = m - used
        if ph.hit_right and others:
            c = others.pop(0)
            b += c.length
            right_end = c.end
            trace.events.append((used, c))
        if ph.hit_left and others:
            c = others.pop()
            a += c.length
            start = c.start
            trace.events.append((used, c))
        if record:
            trace.samples.append((used, Arc(start, a + b)))
        if ph.done:
            break
    else:  # pragma: no cover
        raise RuntimeError(f"{policy} did not terminate")
    final = Arc(start, a + b)
    trace.final_arc = final
    return make_config(others + [final], cfg.step + 1), trace


def disperse_sequence(events: Sequence, policy: Policy, rng=None,
                      cfg: OccupiedConfig | None = None):
    """Run all events in order; returns (final, history, size_process)."""
    cfg = OccupiedConfig() if cfg is None else cfg
    total = cfg.measure() + sum((e[1] for e in events), 0)
    if total >= 1:
        raise ValueError(f"total mass {total} must be < 1")
    history = [cfg]
    sizes = [tuple(sorted(cfg.lengths()))]
    for ev in events:
        cfg, _ = relax(cfg, MassEvent(*ev), policy, rng)
        history.append(cfg)
        sizes.append(tuple(sorted(cfg.lengths())))
    return cfg, history, sizes


def audit_trace(before: OccupiedConfig, trace: RelaxationTrace) -> float:
    """Largest gap between elapsed deposit time and the newly covered measure."""
    worst = 0.0
    for t, arc in trace.samples:
        fresh = arc.length - sum((overlap(arc, c) for c in before.components), 0)
        worst = max(worst, abs(float(fresh - t)))
    return worst
