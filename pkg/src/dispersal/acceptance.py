"""The acceptance suite: one function per criterion, each returning a TestReport.

``scale`` shrinks every sample size (``verify --quick`` uses a small one); the
thresholds never change with it.
"""
from __future__ import annotations

import math
import time
from collections import Counter
from fractions import Fraction

import numpy as np

from .circle import OccupiedConfig
from .collecting_path import build_path, excursions_above_min, rdcs_blocks_batch
from .cost import StandardParking, scaled_cost_experiment, theta_measure
from .discrete import (
    DiscreteConfig, ParticleDispersion, cyclic_runs, discrete_relax, park, phase_time,
)
from .exact_laws import (
    compose_transitions, pmf_N_continuous, sorted_block_law, transition_N_continuous,
    transition_N_discrete,
)
from .excursions import (
    closed_form_mean_id, fragmentation_tree, m_lambda_functional, polya_fluid_check,
    polya_mean_recursion, polya_simulate, sample_excursion, truncated_mean, truncation_deficit,
)
from .harness import (
    ALPHA, TestReport, chi2_gof, combine, dirichlet_spacing_test, exhaustive_discrete_oracle,
    free_trajectory_test, n_counts, simulate_final, trial_rng, universality_test,
)
from .policies import RDCS, MassEvent, make_policy, relax

UNIVERSAL_POLICIES = ("rdcs", "psplit:0.3", "closest", "fluid", "jam")
MASSES = (0.3, 0.1, 0.2)


def _n(x: float, scale: float, floor: int = 1) -> int:
    return max(floor, int(round(x * scale)))


class Suite:
    """Runs the criteria, sharing simulations between those that use the same runs."""

    def __init__(self, seed: int = 20261015, scale: float = 1.0, threads: int = 1):
        self.seed, self.scale, self.threads = seed, scale, threads
        self._finals: dict = {}
        self._parking: list | None = None
        self._excursions: dict | None = None

    # shared simulations -------------------------------------------------------

    def finals(self, policy: str):
        if policy not in self._finals:
            j = UNIVERSAL_POLICIES.index(policy)
            self._finals[policy] = simulate_final(make_policy(policy), MASSES, _n(1e5, self.scale, 2500),
                                                  self.seed, stream=100 + j, threads=self.threads)
        return self._finals[policy]

    def parking_runs(self):
        """Car-by-car parking at n=1e4, t_n(1): block counts and insertion measures."""
        if self._parking is None:
            n = 10**4
            t = phase_time(n, 1.0)
            def one(i):
                choices = trial_rng(self.seed, 600, i).integers(0, n, size=t)
                st = park(n, choices.tolist())
                return len(cyclic_runs(st.occupied_slots)), theta_measure(st).pair(lambda x: x, 0.05)
            self._parking = _map(one, _n(200, self.scale, 20), self.threads)
        return self._parking

    def excursion_functionals(self):
        """<Id 1_[eps,1], M_lam> per excursion sample, for (lam, eps) pairs used by C9 and C10."""
        if self._excursions is None:
            keys = [(0.5, 0.02), (1.0, 0.02), (1.0, 0.05)]
            def one(i):
                e = sample_excursion(2**14, trial_rng(self.seed, 900, i))
                tree = fragmentation_tree(e, 0.02)
                return [m_lambda_functional(lambda l: l, e, lam, eps, tree) for lam, eps in keys]
            vals = np.array(_map(one, _n(2000, self.scale, 100), self.threads))
            self._excursions = {k: vals[:, j] for j, k in enumerate(keys)}
        return self._excursions

    # criteria -----------------------------------------------------------------

    def c1_binomial(self) -> TestReport:
        probs = [float(p) for p in pmf_N_continuous(3, sum(MASSES))]
        reps = []
        for p in UNIVERSAL_POLICIES:
            c = n_counts(self.finals(p))
            reps.append(chi2_gof([c.get(b, 0) for b in (1, 2, 3)], probs, tests=len(UNIVERSAL_POLICIES),
                                 name=f"N_3 pmf {p}"))
        return combine("C1 binomial N_k universality", reps)

    def c2_dirichlet(self) -> TestReport:
        m = _n(1e4, self.scale, 1000)
        reps = [dirichlet_spacing_test(p, MASSES, 2, 0, self.seed, configs=self.finals(p),
                                       max_samples=m, tests=len(UNIVERSAL_POLICIES))
                for p in UNIVERSAL_POLICIES]
        return combine("C2 Dirichlet free spacings", reps)

    def c3_exhaustive(self) -> TestReport:
        rep = exhaustive_discrete_oracle(6, [Fraction(2, 6), Fraction(1, 6)],
                                         ["rdcs", "ldcs", ParticleDispersion(6)])
        rep.name = "C3 exact discrete oracle"
        return rep

    def c4_collecting_path(self) -> TestReport:
        trials = _n(1000, self.scale, 100)
        bad = 0
        for i in range(trials):
            rng = trial_rng(self.seed, 400, i)
            k = int(rng.integers(1, 9))
            den = int(rng.integers(k + 2, 60))
            # positive integer numerators with sum < den
            num = rng.multinomial(den - 1 - k, np.full(k + 1, 1 / (k + 1)))[:k] + 1
            if num.sum() >= den:
                continue
            masses = [Fraction(int(a), den) for a in num]
            us = [Fraction(int(rng.integers(0, 97)), 97) for _ in range(k)]
            cfg = OccupiedConfig()
            for u, m in zip(us, masses):
                cfg, _ = relax(cfg, MassEvent(u, m), RDCS())
            engine = Counter(x for x in cfg.lengths() if x > 0)
            path = Counter(x for x in excursions_above_min(build_path(zip(us, masses))).lengths if x > 0)
            bad += engine != path
        return TestReport("C4 collecting-path lemma", float(bad), 0.0, bad == 0, (trials,))

    def c5_block_law(self) -> TestReport:
        T = _n(1e6, self.scale, 10**4)
        w = Fraction(1, 10)
        law = sorted_block_law([w, w, w])
        lengths, _ = rdcs_blocks_batch(trial_rng(self.seed, 500).random((T, 3)), np.full(3, 0.1))
        keys = Counter(tuple(int(round(x * 10)) for x in sorted(row[row > 0], reverse=True))
                       for row in lengths)
        worst, details = 0.0, []
        for key, p in law.items():
            cell = tuple(int(x * 10) for x in key)
            phat = keys.get(cell, 0) / T
            sigma = math.sqrt(float(p) * (1 - float(p)) / T)
            z = abs(phat - float(p)) / sigma
            worst = max(worst, z)
            details.append({"cell": str(cell), "exact": str(p), "mc": phat, "z": z})
        extra = sum(v for k, v in keys.items() if tuple(Fraction(x, 10) for x in k) not in law)
        return TestReport("C5 block law", worst, 3.0, worst <= 3.0 and extra == 0, (T,), None, details)

    def c6_phase_discrete(self) -> TestReport:
        runs = self.parking_runs()
        v = float(np.mean([r[0] for r in runs])) / 100.0
        return TestReport("C6 discrete phase N/sqrt(n)", v, 0.66, 0.60 <= v <= 0.66, (len(runs),), None,
                          [{"interval": [0.60, 0.66], "target": 1 - math.exp(-1)}])

    def _coupled(self):
        n = 10**4
        t = phase_time(n, 1.0)
        def one(i):
            u = trial_rng(self.seed, 700, i).random(t)
            slots = np.ceil(n * u).astype(np.int64) % n
            st = park(n, slots.tolist())
            disc = sorted((l for _, l in cyclic_runs(st.occupied_slots)), reverse=True)
            L, _ = rdcs_blocks_batch(u[None, :], np.full(t, 1.0 / n))
            cont = np.sort(L[0][L[0] > 0])[::-1]
            # counting parts of both collecting paths (in units of 1/n), at every jump, both sides
            A, B = np.sort(u), np.sort(np.ceil(n * u) / n)
            xs = np.concatenate((A, B))
            sup = max(int(np.abs(np.searchsorted(A, xs, side) - np.searchsorted(B, xs, side)).max())
                      for side in ("left", "right"))
            cells = np.bincount(np.ceil(n * u).astype(np.int64) - 1, minlength=n)
            top = float(np.abs(np.array(disc[:3]) / n - cont[:3]).max())
            return len(cont), sup, int(cells.max()), top
        return _map(one, _n(200, self.scale, 20), self.threads), n

    def c7_phase_continuous(self) -> TestReport:
        res, n = self._coupled()
        v = float(np.mean([r[0] for r in res])) / math.sqrt(n)
        sup_ok = all(r[1] <= r[2] for r in res)
        within = sum(r[3] <= 2 / n + 1e-12 for r in res)
        ok = 0.95 <= v <= 1.05 and sup_ok
        return TestReport("C7 continuous phase N/sqrt(n) and coupled paths", v, 1.05, ok, (len(res),), None,
                          [{"interval": [0.95, 1.05], "sup_bound_all_trials": sup_ok,
                            "top3_within_2_over_n": f"{within}/{len(res)}",
                            "median_top3_diff": float(np.median([r[3] for r in res]))}])

    def c7_top3_literal(self) -> TestReport:
        res, n = self._coupled()
        within = sum(r[3] <= 2 / n + 1e-12 for r in res)
        return TestReport("C7 top-3 block sizes within 2/n in every trial", float(len(res) - within), 0.0,
                          within == len(res), (len(res),))

    def c8_cost(self) -> TestReport:
        n, T = 4 * 10**4, _n(500, self.scale, 50)
        x = scaled_cost_experiment(n, 0.0, StandardParking(), T, self.seed, realized=True)
        target = math.sqrt(math.pi / 8)
        rel = abs(x.mean() - target) / target
        return TestReport("C8 full-table cost / n^1.5 relative error", rel, 0.05, rel <= 0.05, (T,), None,
                          [{"mean": float(x.mean()), "target": target,
                            "with_tries": float(x.mean() + n / n**1.5)}])

    def c9_functional(self) -> TestReport:
        ex = self.excursion_functionals()
        reps = []
        for lam in (0.5, 1.0):
            v = ex[(lam, 0.02)]
            mc = float(v.mean())
            closed = closed_form_mean_id(lam)
            allow = 0.05 * closed + truncation_deficit(lam, 0.02)
            trunc = truncated_mean(lambda l: l, lam, 0.02)
            ok = abs(mc - closed) <= allow and abs(mc - trunc) <= 0.05 * trunc
            reps.append(TestReport(f"M_lam functional lam={lam}", mc, allow, ok, (v.size,), None,
                                   [{"closed_form": closed, "truncated_exact": trunc,
                                     "se": float(v.std() / math.sqrt(v.size))}]))
        return combine("C9 M_lambda functional", reps)

    def c10_theta(self) -> TestReport:
        theta = float(np.mean([r[1] for r in self.parking_runs()]))
        exc = float(self.excursion_functionals()[(1.0, 0.05)].mean())
        rel = abs(theta - exc) / exc
        return TestReport("C10 Theta_n vs excursion side relative difference", rel, 0.10, rel <= 0.10,
                          (len(self.parking_runs()),), None,
                          [{"theta": theta, "excursion_estimate": exc,
                            "exact_truncated": truncated_mean(lambda l: l, 1.0, 0.05)}])

    def c11_transitions(self) -> TestReport:
        rng = trial_rng(self.seed, 1100)
        worst = 0.0
        for k in range(1, 7):
            for _ in range(5):
                ms = rng.dirichlet(np.ones(k + 1))[:k] * rng.uniform(0.2, 0.95)
                law = compose_transitions(list(ms))
                pmf = pmf_N_continuous(k, float(ms.sum()))
                worst = max(worst, max(abs(law.get(j + 1, 0.0) - p) for j, p in enumerate(pmf)))
        ck = TestReport("Chapman-Kolmogorov", worst, 1e-10, worst <= 1e-10, (30,))
        reps = [ck]
        # continuous one-step transitions from N_2 to N_3
        T = _n(4e4, self.scale, 4000)
        pairs = Counter()
        for i in range(T):
            r = trial_rng(self.seed, 1101, i)
            cfg = OccupiedConfig()
            ns = []
            for u, m in zip(r.random(3), MASSES):
                cfg, _ = relax(cfg, MassEvent(float(u), m), RDCS())
                ns.append(cfg.N)
            pairs[(ns[1], ns[2])] += 1
        tests = 2 + 2
        for b in (1, 2):
            row = {j: c for (a, j), c in pairs.items() if a == b}
            law = transition_N_continuous(b, MASSES[0] + MASSES[1], MASSES[2])
            support = sorted(law)
            reps.append(chi2_gof([row.get(j, 0) for j in support], [law[j] for j in support], tests=tests,
                                 name=f"continuous N_2={b} -> N_3"))
        # grid version, n = 10, masses 2/10, 1/10, 3/10
        n = 10
        gm = [Fraction(2, n), Fraction(1, n), Fraction(3, n)]
        dpairs = Counter()
        for i in range(T):
            r = trial_rng(self.seed, 1102, i)
            cfg = DiscreteConfig(n)
            ns = []
            for j, m in zip(r.integers(0, n, size=3), gm):
                cfg = discrete_relax(cfg, (Fraction(int(j), n), m), RDCS())
                ns.append(cfg.N)
            dpairs[(ns[1], ns[2])] += 1
        for b in (1, 2):
            row = {j: c for (a, j), c in dpairs.items() if a == b}
            law = transition_N_discrete(b, gm[0] + gm[1], n, gm[2])
            support = sorted(law)
            reps.append(chi2_gof([row.get(j, 0) for j in support], [float(law[j]) for j in support],
                                 tests=tests, name=f"grid N_2={b} -> N_3"))
        return combine("C11 transition checks", reps)

    def c12_polya(self) -> TestReport:
        sup = polya_fluid_check(0.5, 0.5, 10**5, 2.0, trial_rng(self.seed, 1200))
        fluid = TestReport("Polya fluid sup error", sup, 1e-2, sup < 1e-2, (10**5,))
        runs = _n(1e5, self.scale, 2000)
        paths = polya_simulate(5, 5, 20, trial_rng(self.seed, 1201), runs)
        mean = polya_mean_recursion(5, 5, 20)
        se = paths.std(axis=0) / math.sqrt(runs)
        z = np.abs(paths.mean(axis=0) - mean) / np.where(se > 0, se, np.inf)
        zmax = float(z.max())
        mc = TestReport("Polya mean recursion vs MC (M=10)", zmax, 3.0, zmax <= 3.0, (runs,))
        return combine("C12 Polya urn", [fluid, mc])

    def c13_negative(self) -> TestReport:
        T = _n(2e4, self.scale, 2000)
        inv = universality_test(["rdcs", "barrier:4"], (0.3, 0.2), T, self.seed)
        free = free_trajectory_test("rdcs", "psplit:0.5", MASSES, T, self.seed)
        ok = (not inv.passed) and (not free.passed)
        return TestReport("C13 negative controls detected", float(max(inv.p_value, free.p_value)), ALPHA, ok,
                          (T,), None, [inv.to_dict() | {"expected": "fail"}, free.to_dict() | {"expected": "fail"}])

    CRITERIA = ("c1_binomial", "c2_dirichlet", "c3_exhaustive", "c4_collecting_path", "c5_block_law",
                "c6_phase_discrete", "c7_phase_continuous", "c8_cost", "c9_functional", "c10_theta",
                "c11_transitions", "c12_polya", "c13_negative")

    def run(self, names=None, log=None) -> list[TestReport]:
        out = []
        for name in names or self.CRITERIA:
            t0 = time.perf_counter()
            rep = getattr(self, name)()
            rep.details.append({"seconds": round(time.perf_counter() - t0, 3)})
            out.append(rep)
            if log:
                log(rep.line())
        return out


def _map(fn, trials, threads):
    from .harness import map_trials
    return map_trials(fn, trials, threads)
