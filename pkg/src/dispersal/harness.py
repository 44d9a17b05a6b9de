"""Goodness-of-fit tests and the Monte Carlo drivers behind the verification suite.

Every trial draws from ``trial_rng(master_seed, trial, ...)``, so results do
not depend on scheduling. Tests use alpha = 0.01 split evenly (Bonferroni)
over the number of tests in a family.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import stats

from .circle import OccupiedConfig, free_components, label_blocks
from .discrete import DiscreteConfig, ParticleDispersion, particle_outcomes
from .exact_laws import piling_Q_discrete
from .policies import MassEvent, Policy, make_policy, relax

ALPHA = 0.01


def trial_rng(master_seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng([int(master_seed) & 0xFFFFFFFFFFFFFFFF, *stream])


@dataclass
class TestReport:
    __test__ = False

    name: str
    value: float
    threshold: float
    passed: bool
    sizes: tuple = ()
    p_value: float | None = None
    details: list = field(default_factory=list)

    def line(self) -> str:
        p = "" if self.p_value is None else f" p={self.p_value:.3g}"
        return (f"{'PASS' if self.passed else 'FAIL'} {self.name}: value={self.value:.6g} "
                f"threshold={self.threshold:.6g}{p} n={self.sizes}")

    def to_dict(self) -> dict:
        return {
            "name": self.name, "value": self.value, "threshold": self.threshold,
            "passed": self.passed, "sizes": list(self.sizes), "p_value": self.p_value,
            "details": [d.to_dict() if isinstance(d, TestReport) else d for d in self.details],
        }


def combine(name: str, reports: Sequence[TestReport]) -> TestReport:
    """Family report: value is the number of failing members (threshold 0); p is the smallest member p."""
    ps = [r.p_value for r in reports if r.p_value is not None]
    failed = sum(not r.passed for r in reports)
    return TestReport(name, float(failed), 0.0, failed == 0, (len(reports),),
                      min(ps) if ps else None, list(reports))


# --- basic tests ---------------------------------------------------------------

def _pool(expected: np.ndarray, *observed: np.ndarray, min_expected: float = 5.0):
    """Merge the sparsest cells until every pooled cell has enough expected count."""
    order = np.argsort(expected)
    keep, tail = [], []
    acc = 0.0
    for i in order:
        if acc < min_expected:
            tail.append(i)
            acc += expected[i]
        else:
            keep.append(i)
    if acc < min_expected and keep:
        tail.append(keep.pop(0))
    def merge(v):
        return np.concatenate((v[keep], [v[tail].sum()])) if tail else v[keep]
    return merge(expected), [merge(o) for o in observed]


def chi2_gof(observed, expected_probs, alpha: float = ALPHA, tests: int = 1,
             name: str = "chi2_gof") -> TestReport:
    obs = np.asarray(observed, dtype=float)
    probs = np.asarray(expected_probs, dtype=float)
    n = obs.sum()
    if n < 50:
        raise ValueError("too few observations for the chi-square approximation")
    if abs(probs.sum() - 1) > 1e-9:
        raise ValueError("expected probabilities must sum to 1")
    if np.any(obs[probs == 0] > 0):
        return TestReport(name, math.inf, math.nan, False, (int(n),), 0.0)
    mask = probs > 0
    exp, (o,) = _pool(n * probs[mask], obs[mask])
    df = len(exp) - 1
    if df < 1:
        return TestReport(name, 0.0, 0.0, True, (int(n),), 1.0)
    stat = float(((o - exp) ** 2 / exp).sum())
    p = float(stats.chi2.sf(stat, df))
    crit = float(stats.chi2.isf(alpha / tests, df))
    return TestReport(name, stat, crit, stat <= crit, (int(n),), p)


def chi2_homogeneity(counts_a: dict, counts_b: dict, alpha: float = ALPHA, tests: int = 1,
                     name: str = "chi2_homogeneity") -> TestReport:
    """Two-sample chi-square on categorical outcomes."""
    keys = sorted(set(counts_a) | set(counts_b), key=repr)
    a = np.array([counts_a.get(k, 0) for k in keys], dtype=float)
    b = np.array([counts_b.get(k, 0) for k in keys], dtype=float)
    na, nb = a.sum(), b.sum()
    if min(na, nb) < 50:
        raise ValueError("too few observations")
    tot = a + b
    exp_a, exp_b = tot * na / (na + nb), tot * nb / (na + nb)
    pooled, (pa, pb, pea) = _pool(np.minimum(exp_a, exp_b), a, b, exp_a)
    pe_b = (pa + pb) - pea
    df = len(pooled) - 1
    if df < 1:
        return TestReport(name, 0.0, 0.0, True, (int(na), int(nb)), 1.0)
    stat = float(((pa - pea) ** 2 / pea).sum() + ((pb - pe_b) ** 2 / pe_b).sum())
    p = float(stats.chi2.sf(stat, df))
    crit = float(stats.chi2.isf(alpha / tests, df))
    return TestReport(name, stat, crit, stat <= crit, (int(na), int(nb)), p)


def ks_two_sample(xs, ys, alpha: float = ALPHA, tests: int = 1, name: str = "ks_two_sample") -> TestReport:
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    n, m = xs.size, ys.size
    if min(n, m) < 50:
        raise ValueError("need at least 50 observations per sample")
    res = stats.ks_2samp(xs, ys, method="asymp" if n * m > 10_000 else "auto")
    a = alpha / tests
    crit = math.sqrt(-math.log(a / 2) / 2) * math.sqrt((n + m) / (n * m))
    return TestReport(name, float(res.statistic), crit, float(res.statistic) <= crit, (n, m), float(res.pvalue))


def ks_one_sample(xs, cdf, alpha: float = ALPHA, tests: int = 1, name: str = "ks_one_sample") -> TestReport:
    xs = np.asarray(xs, dtype=float)
    if xs.size < 50:
        raise ValueError("need at least 50 observations")
    res = stats.kstest(xs, cdf)
    crit = float(stats.kstwo.isf(alpha / tests, xs.size))
    return TestReport(name, float(res.statistic), crit, float(res.statistic) <= crit, (xs.size,), float(res.pvalue))


# --- simulation drivers --------------------------------------------------------

def map_trials(fn, trials: int, threads: int = 1) -> list:
    """[fn(0), ..., fn(trials-1)]; results come back in trial order whatever the thread count."""
    if threads <= 1 or trials < 2:
        return [fn(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(trials)))


def _trajectory(policy, masses, seed, stream, i):
    rng = trial_rng(seed, stream, i)
    us = rng.random(len(masses))
    cfg = OccupiedConfig()
    hist = [cfg]
    for u, m in zip(us, masses):
        cfg, _ = relax(cfg, MassEvent(float(u), m), policy, rng)
        hist.append(cfg)
    return hist


def simulate_final(policy: Policy, masses: Sequence[float], trials: int, seed: int,
                   stream: int = 0, threads: int = 1):
    """Final configurations of ``trials`` runs with uniform arrivals, in trial order."""
    return map_trials(lambda i: _trajectory(policy, masses, seed, stream, i)[-1], trials, threads)


def simulate_trajectories(policy: Policy, masses, trials, seed, stream=0, threads: int = 1):
    """Per trial, the list of configurations O^(0), ..., O^(k)."""
    return map_trials(lambda i: _trajectory(policy, masses, seed, stream, i), trials, threads)


def n_counts(configs) -> Counter:
    return Counter(c.N for c in configs)


def _sorted_occ(cfg, k):
    v = sorted((float(x) for x in cfg.lengths()), reverse=True)
    return v + [0.0] * (k - len(v))


def _sorted_free(cfg, k):
    v = sorted((float(f[1]) for f in free_components(cfg)), reverse=True)
    return v + [0.0] * (k - len(v))


def universality_test(policies: Sequence, masses: Sequence[float], trials: int, seed: int,
                      configs: dict | None = None, name: str = "universality") -> TestReport:
    """Every policy against the first: chi-square on N_k, KS on each sorted length marginal."""
    pols = [make_policy(p) for p in policies]
    if len(pols) < 2:
        raise ValueError("need at least two policies")
    k = len(masses)
    finals = configs or {}
    sims = [finals.get(repr(p)) or simulate_final(p, masses, trials, seed, stream=j)
            for j, p in enumerate(pols)]
    ref = sims[0]
    tests_per_pair = 1 + 2 * k
    ntests = tests_per_pair * (len(pols) - 1)
    reports = []
    for p, sim in zip(pols[1:], sims[1:]):
        reports.append(chi2_homogeneity(n_counts(ref), n_counts(sim), tests=ntests,
                                        name=f"N_k {pols[0]} vs {p}"))
        for label, fn in (("occupied", _sorted_occ), ("free", _sorted_free)):
            A = np.array([fn(c, k) for c in ref])
            B = np.array([fn(c, k) for c in sim])
            for i in range(k):
                reports.append(ks_two_sample(A[:, i], B[:, i], tests=ntests,
                                             name=f"{label}[{i}] {pols[0]} vs {p}"))
    return combine(name, reports)


def dirichlet_spacing_test(policy, masses: Sequence[float], b: int, trials: int, seed: int,
                           configs=None, max_samples: int | None = None, tests: int = 1,
                           name: str = "dirichlet_spacing") -> TestReport:
    """Given N_k = b, a uniformly rotated partial sum of free lengths over R is uniform."""
    pol = make_policy(policy)
    finals = configs if configs is not None else simulate_final(pol, masses, trials, seed)
    R = 1.0 - float(sum(masses))
    if b == 1:
        return TestReport(name, 0.0, 0.0, True, (0,), 1.0)
    rng = trial_rng(seed, 99)
    xs = []
    for cfg in finals:
        if cfg.N != b:
            continue
        free = [float(f[1]) for f in free_components(cfg)]
        rot = int(rng.integers(0, b))
        j = int(rng.integers(1, b))
        free = free[rot:] + free[:rot]
        xs.append(sum(free[:j]) / R)
        if max_samples is not None and len(xs) == max_samples:
            break
    if len(xs) < 1000:
        raise ValueError(f"only {len(xs)} samples with N = {b}; need 1000")
    return ks_one_sample(xs, "uniform", tests=tests, name=f"{name} {pol}")


def trajectory_signature(hist) -> tuple:
    return tuple(tuple(sorted(round(float(x), 6) for x in cfg.lengths())) for cfg in hist)


def process_universality_test(policies, masses, trials: int, seed: int,
                              name: str = "process_universality") -> TestReport:
    pols = [make_policy(p) for p in policies]
    sigs = [Counter(trajectory_signature(h) for h in simulate_trajectories(p, masses, trials, seed, j))
            for j, p in enumerate(pols)]
    if len(masses) <= 1:
        return TestReport(name, 0.0, 0.0, True, (trials,), 1.0)
    n = len(pols) - 1
    reports = [chi2_homogeneity(sigs[0], s, tests=n, name=f"{name} {pols[0]} vs {p}")
               for p, s in zip(pols[1:], sigs[1:])]
    return combine(name, reports)


def single_shrink_events(hist) -> int:
    """Steps where the number of free gaps is unchanged and exactly one gap shrank."""
    count = 0
    for before, after in zip(hist[:-1], hist[1:]):
        if before.N < 2 or after.N != before.N:
            continue
        fb = Counter(f[1] for f in free_components(before))
        fa = Counter(f[1] for f in free_components(after))
        gone, new = fb - fa, fa - fb
        if sum(gone.values()) == 1 and sum(new.values()) == 1 and next(iter(new)) < next(iter(gone)):
            count += 1
    return count


def free_trajectory_test(policy_a, policy_b, masses, trials: int, seed: int,
                         name: str = "free_trajectory") -> TestReport:
    """Compare how often a single free gap shrinks while the others stay put."""
    pa, pb = make_policy(policy_a), make_policy(policy_b)
    ca = Counter(min(single_shrink_events(h), 1) for h in simulate_trajectories(pa, masses, trials, seed, 0))
    cb = Counter(min(single_shrink_events(h), 1) for h in simulate_trajectories(pb, masses, trials, seed, 1))
    rep = chi2_homogeneity(ca, cb, name=f"{name} {pa} vs {pb}")
    rep.details = [{"policy": repr(pa), "runs_with_event": ca.get(1, 0)},
                   {"policy": repr(pb), "runs_with_event": cb.get(1, 0)}]
    return rep


# --- exhaustive grid oracle ----------------------------------------------------

def final_law(n: int, masses: Sequence, policy) -> dict:
    """Exact law of the final occupied set over all n**k arrival words."""
    masses = [Fraction(m) for m in masses]
    k = len(masses)
    if n ** k > 10**7:
        raise ValueError("enumeration cap exceeded")
    weight = Fraction(1, n**k)
    law: dict = {}
    particle = isinstance(policy, ParticleDispersion)
    for word in itertools.product(range(n), repeat=k):
        cur = {DiscreteConfig(n).occupied: Fraction(1)}
        for j, m in zip(word, masses):
            nxt: dict = {}
            for occ, p in cur.items():
                if particle:
                    for res, q in particle_outcomes(DiscreteConfig(n, occ), (Fraction(j, n), m)).items():
                        nxt[res.components] = nxt.get(res.components, 0) + p * q
                else:
                    res, _ = relax(occ, MassEvent(Fraction(j, n), m), policy)
                    nxt[res.components] = nxt.get(res.components, 0) + p
            cur = {OccupiedConfig(c, occ.step + 1): p for c, p in nxt.items()}
        for occ, p in cur.items():
            law[occ.components] = law.get(occ.components, 0) + p * weight
    return law


def exhaustive_discrete_oracle(n: int, masses: Sequence, policies: Sequence,
                               name: str = "exhaustive_discrete") -> TestReport:
    laws = [final_law(n, masses, make_policy(p) if not isinstance(p, Policy) else p) for p in policies]
    same = all(l == laws[0] for l in laws[1:])
    W = sum(Fraction(m) for m in masses)
    p1 = sum((p for comps, p in laws[0].items() if len(comps) == 1), Fraction(0))
    q = piling_Q_discrete(len(masses), W, n)
    ok = same and p1 == q
    worst = max((abs(float(l.get(c, 0) - laws[0].get(c, 0))) for l in laws[1:]
                 for c in set(l) | set(laws[0])), default=0.0)
    return TestReport(name, worst, 0.0, ok, (n ** len(masses),), None,
                      [{"P(N=1)": str(p1), "piling": str(q), "laws_equal": same}])


def discrete_spacing_oracle(n: int, masses: Sequence, b: int, policy="rdcs",
                            name: str = "discrete_spacing") -> TestReport:
    """Exact check: given b blocks, uniformly rotated free gaps (in cells) are DDirichlet(R, b)."""
    law = final_law(n, masses, make_policy(policy))
    R = n - int(sum(Fraction(m) for m in masses) * n)
    cond: dict = {}
    pb = Fraction(0)
    for comps, p in law.items():
        if len(comps) != b:
            continue
        pb += p
        gaps = [int(f[1] * n) for f in free_components(OccupiedConfig(comps))]
        for r in range(b):
            key = tuple(gaps[r:] + gaps[:r])
            cond[key] = cond.get(key, 0) + p / b
    if pb == 0:
        raise ValueError(f"N = {b} has probability 0")
    target = Fraction(1, math.comb(R - 1, b - 1))
    worst = max(abs(v / pb - target) for v in cond.values())
    ok = worst == 0 and len(cond) == math.comb(R - 1, b - 1)
    return TestReport(name, float(worst), 0.0, ok, (n ** len(masses),), None,
                      [{"P(N=b)": str(pb), "compositions": len(cond)}])
