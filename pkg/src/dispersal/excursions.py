"""Brownian excursion samples, the tilted fragmentation and its functionals.

The excursion comes from a Poisson(1) - 1 walk conditioned to first reach -1
at step N (cycle lemma), scaled by sqrt(N). For a slope t the path
e(x) - t x has excursions above its running minimum; as t grows new record
points appear and intervals split. A split of the interval (p, q) happens at
the slope min_{p<x<q} (e(x) - e(p)) / (x - p), at the point achieving it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, special


@dataclass(frozen=True)
class ExcursionGrid:
    values: np.ndarray     # e(i/N), i = 0..N

    @property
    def N(self) -> int:
        return len(self.values) - 1

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.N + 1) / self.N

    def tilted(self, lam: float) -> np.ndarray:
        return self.values - lam * self.x


def sample_excursion(N: int, rng) -> ExcursionGrid:
    """Scaled Poisson(1) walk excursion of N steps."""
    if N < 64:
        raise ValueError("N must be >= 64")
    # iid Poisson(1) conditioned on summing to N-1 is multinomial
    counts = rng.multinomial(N - 1, np.full(N, 1.0 / N))
    S = np.cumsum(counts - 1)
    i = int(np.argmin(S))            # first time of the minimum
    inc = np.roll(counts - 1, -(i + 1))
    walk = np.concatenate(([0], np.cumsum(inc)))
    vals = walk / math.sqrt(N)
    vals[-1] = 0.0
    return ExcursionGrid(vals)


def record_indices(v: np.ndarray) -> np.ndarray:
    """Indices where v sets a strict new running minimum (index 0 always included)."""
    prev = np.minimum.accumulate(v)
    rec = np.empty(v.size, dtype=bool)
    rec[0] = True
    rec[1:] = v[1:] < prev[:-1]
    return np.flatnonzero(rec)


def excursion_intervals(e: ExcursionGrid, lam: float) -> list[tuple[int, int]]:
    """(start, end) index pairs of the excursions of e - lam x above its running minimum."""
    rec = record_indices(e.tilted(lam))
    ends = list(rec[1:]) + ([e.N] if rec[-1] != e.N else [])
    return [(int(a), int(b)) for a, b in zip(rec, ends) if b > a]


def largest_excursions(e: ExcursionGrid, lam: float, k: int) -> list[float]:
    lengths = sorted(((b - a) / e.N for a, b in excursion_intervals(e, lam)), reverse=True)
    return (lengths + [0.0] * k)[:k]


class Fragment(NamedTuple):
    length: float    # (q - p) / N
    born: float
    death: float
    p: int
    q: int


def fragmentation_tree(e: ExcursionGrid, min_len: float) -> list[Fragment]:
    """All fragments spanning >= min_len between grid records, with their slope lifetimes.

    A fragment (p, q) exists for slopes in [born, death); the root (0, N)
    is born at slope 0.
    """
    v = e.values
    N = e.N
    idx = np.arange(N + 1, dtype=float)
    min_steps = max(2, int(math.ceil(min_len * N - 1e-9)))
    out = []
    stack = [(0, N, 0.0)]
    while stack:
        p, q, born = stack.pop()
        if q - p < min_steps:
            continue
        inner = slice(p + 1, q)
        slopes = (v[inner] - v[p]) / (idx[inner] - p) * N
        j = int(np.argmin(slopes))
        death = float(slopes[j])
        out.append(Fragment((q - p) / N, born, death, p, q))
        x = p + 1 + j
        stack.append((p, x, death))
        stack.append((x, q, death))
    return out


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _crossing_lengths(v: np.ndarray, N: int, p: np.ndarray, q: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Length of the excursion started at record p, ending where the interpolated tilted path
    comes back to its level inside the last segment (q-1, q). Broadcasts over arrays."""
    level = v[p] - t * p / N
    lo = v[q - 1] - t * (q - 1) / N
    drop = (v[q] - v[q - 1]) - t / N
    theta = np.clip((level - lo) / np.where(drop < 0, drop, -np.inf), 0.0, 1.0)
    return (q - 1 - p + theta) / N


def _apply(g, x: np.ndarray) -> np.ndarray:
    try:
        y = np.asarray(g(x), dtype=float)
        if y.shape == x.shape:
            return y
    except (TypeError, ValueError):
        pass
    return np.array([g(float(a)) for a in x.ravel()]).reshape(x.shape)


def m_lambda_functional(g: Callable, e: ExcursionGrid, lam: float, eps: float,
                        tree: list | None = None, interpolate: bool = True) -> float:
    """<g 1_{[eps,1]}, M_lam> = int_lam^inf sum_k g(l_t(k)) l_t(k) dt for one sample.

    ``interpolate=True`` reads the excursion as the piecewise linear path and
    measures each fragment up to its exact return point; ``False`` uses the
    grid record spacing (q - p) / N throughout the fragment's lifetime.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    tree = fragmentation_tree(e, eps) if tree is None else tree
    frags = [f for f in tree if f.length >= eps and f.death > max(f.born, lam)]
    if not frags:
        return 0.0
    length, born, death, p, q = (np.array(c) for c in zip(*frags))
    lo = np.maximum(born, lam)
    span = death - lo
    if not interpolate:
        return float(np.sum(_apply(g, length) * length * span))
    t = lo[:, None] + (_GL_X[None, :] + 1) * span[:, None] / 2
    ell = _crossing_lengths(e.values, e.N, p[:, None], q[:, None], t)
    vals = np.where(ell >= eps, _apply(g, ell) * ell, 0.0)
    return float(np.sum(vals @ _GL_W * span / 2))


def m_lambda_functional_grid(g: Callable, e: ExcursionGrid, lam: float, eps: float,
                             t_max: float | None = None, t_grid: int = 512) -> float:
    """Same functional by sweeping a geometric slope grid and the trapezoid rule."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    rng_e = float(e.values.max() - e.values.min())
    if t_max is None:
        t_max = max(4 * lam, 8 * rng_e / eps)
    lo = max(lam, 1e-3)
    ts = np.concatenate(([lam], np.geomspace(lo, t_max, t_grid - 1))) if lam < lo else np.geomspace(lo, t_max, t_grid)
    vals = np.empty(ts.size)
    for i, t in enumerate(ts):
        lens = np.array([(b - a) / e.N for a, b in excursion_intervals(e, t)])
        keep = lens >= eps
        vals[i] = float(np.sum([g(l) * l for l in lens[keep]])) if keep.any() else 0.0
    if vals[-1] != 0.0:
        raise ValueError("t_max too small: an excursion of length >= eps survives")
    trap = getattr(np, "trapezoid", None) or np.trapz
    return float(trap(vals, ts))


def reflected_area(e: ExcursionGrid, lam: float) -> float:
    """Trapezoid integral of e_lam - running min of e_lam over [0, 1]."""
    v = e.tilted(lam)
    r = v - np.minimum.accumulate(v)
    return float((r.sum() - 0.5 * (r[0] + r[-1])) / e.N)


# --- closed forms -------------------------------------------------------------

def closed_form_mean_id(lam: float) -> float:
    """E <Id, M_lam> = sqrt(pi/2) exp(lam^2/2) erfc(lam/sqrt 2)."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    return math.sqrt(math.pi / 2) * float(special.erfcx(lam / math.sqrt(2)))


def _tail_L(m: int, y: float) -> float:
    """P(L_{m+1} >= y): Poisson(y^2/2) below m."""
    a = y * y / 2
    return float(special.gammaincc(m, a)) if a > 0 else 1.0


def _density_L(m: int, y: float) -> float:
    a = y * y / 2
    return y * math.exp(-a + (m - 1) * math.log(a) - math.lgamma(m)) if a > 0 else (1.0 * y if m == 1 else 0.0)


def closed_form_mean_power(m: int, lam: float, without_length_factor: bool = False) -> float:
    """E <x^m, M_lam> = E[exp(-lam L) / L] with L the length spanned by m+1 CRT points.

    ``without_length_factor=True`` returns E[exp(-lam L)] instead, for comparison.
    """
    if m < 1 or lam < 0:
        raise ValueError("need m >= 1 and lam >= 0")
    if without_length_factor:
        f = lambda y: math.exp(-lam * y) * _density_L(m, y)
    else:
        f = lambda y: math.exp(-lam * y) * _density_L(m, y) / y if y > 0 else 0.0
    val, _ = integrate.quad(f, 0.0, np.inf, limit=200)
    return float(val)


def fragment_intensity(ell: float, lam: float) -> float:
    """Density in l of E sum over the fragmentation: E<f, M_lam> = int f(l) * this dl."""
    if not 0 < ell < 1:
        return 0.0
    return (2 * math.pi) ** -0.5 * ell**-1.5 * (1 - ell) ** -0.5 * math.exp(-lam * lam * ell / (2 * (1 - ell)))


def truncated_mean(g: Callable, lam: float, eps: float) -> float:
    """E <g 1_{[eps,1]}, M_lam> by quadrature against the fragment intensity."""
    # substitute l = eps + (1 - eps) sin^2(theta) to tame the endpoint singularity
    def h(th):
        s = math.sin(th)
        ell = eps + (1 - eps) * s * s
        jac = 2 * (1 - eps) * s * math.cos(th)
        return g(ell) * fragment_intensity(ell, lam) * jac
    val, _ = integrate.quad(h, 0.0, math.pi / 2, limit=200)
    return float(val)


def truncation_deficit(lam: float, eps: float) -> float:
    """E <Id 1_{[0,eps)}, M_lam>: mass lost by ignoring fragments shorter than eps."""
    val, _ = integrate.quad(lambda u: 2 * u**3 * fragment_intensity(u * u, lam), 0.0, math.sqrt(eps))
    return float(val)


# --- Polya urn ----------------------------------------------------------------

def polya_fluid(alpha0: float, beta0: float, t: np.ndarray) -> np.ndarray:
    s = alpha0 + beta0
    return (s * beta0 + t * s + t * t / 2) / (t + s)


def polya_mean_recursion(a0: int, b0: int, T: int) -> np.ndarray:
    """E b(t), t = 0..T, from the closed recursion."""
    L0 = a0 + b0
    m1 = b0 + a0 / L0
    t = np.arange(T + 1, dtype=float)
    out = (L0 * m1 + (t - 1) * L0 + (t - 1) * t / 2) / (t - 1 + L0)
    out[0] = b0
    return out


def polya_exact_mean(a0: int, b0: int, T: int) -> list:
    """E b(t) from the exact law of b(t), propagated step by step."""
    from fractions import Fraction
    L0 = a0 + b0
    law = {b0: Fraction(1)}
    means = [Fraction(b0)]
    for t in range(T):
        L = L0 + t
        nxt: dict = {}
        for b, p in law.items():
            up = Fraction(L - b, L)
            nxt[b + 1] = nxt.get(b + 1, 0) + p * up
            nxt[b] = nxt.get(b, 0) + p * (1 - up)
        law = nxt
        means.append(sum(b * p for b, p in law.items()))
    return means


def polya_simulate(a0: int, b0: int, T: int, rng, runs: int = 1) -> np.ndarray:
    """b(t) for t = 0..T; shape (runs, T+1). Drawing an a-ball adds a b-ball and vice versa."""
    b = np.full(runs, b0, dtype=np.int64)
    out = np.empty((runs, T + 1), dtype=np.int64)
    out[:, 0] = b
    L0 = a0 + b0
    for t in range(T):
        L = L0 + t
        b = b + (rng.random(runs) * L < (L - b))
        out[:, t + 1] = b
    return out


def polya_fluid_check(alpha0: float, beta0: float, M: int, t_max: float, rng) -> float:
    """sup_t |b(tM)/M - fluid(t)| on one urn run started from (M alpha0, M beta0)."""
    if alpha0 <= 0 or beta0 <= 0:
        raise ValueError("alpha0, beta0 must be positive")
    a0, b0 = int(round(M * alpha0)), int(round(M * beta0))
    T = int(round(t_max * M))
    path = polya_simulate(a0, b0, T, rng)[0]
    t = np.arange(T + 1) / M
    return float(np.max(np.abs(path / M - polya_fluid(a0 / M, b0 / M, t))))
