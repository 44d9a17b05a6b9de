from collections import Counter
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dispersal.circle import OccupiedConfig, rotated_lengths
from dispersal.collecting_path import (
    argmin_point, bridge_argmin_point, build_path, excursions_above_min, labeled_from_blocks,
    rdcs_blocks_batch, reflected_integral, reflected_profile, rotate_at_argmin, trapezoid,
)
from dispersal.policies import RDCS, MassEvent, relax


def test_path_evaluation():
    p = build_path([(F(1, 2), F(3, 10))])
    assert p(F(4, 10)) == F(-4, 10)
    assert p(F(6, 10)) == F(-3, 10)
    assert p.left_limit(F(1, 2)) == F(-1, 2)
    assert build_path([])(F(1, 3)) == F(-1, 3)


def test_tie_merge():
    p = build_path([(F(2, 10), F(1, 10)), (F(2, 10), F(2, 10))])
    assert p.positions == (F(2, 10),) and p.jumps == (F(3, 10),)


def test_mass_guard():
    with pytest.raises(ValueError):
        build_path([(0.1, 0.7), (0.2, 0.3)])
    with pytest.raises(ValueError):
        build_path([(0.1, -0.1)])


def test_argmin_conventions_single_mass():
    p = build_path([(F(1, 2), F(3, 10))])
    # S itself is lowest at the end of the period, -0.7
    assert argmin_point(p) == 1
    # the bridge S_t - S_1 t is lowest just before the jump
    assert bridge_argmin_point(p) == F(1, 2)


def test_argmin_mass_at_zero():
    p = build_path([(F(0), F(3, 10))])
    assert argmin_point(p) == 1
    assert p.S1 == F(-7, 10)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 99).map(lambda i: F(i, 100)),
                          st.integers(0, 15).map(lambda i: F(i, 100))), max_size=6))
def test_bridge_rotation_nonnegative(events):
    if sum((m for _, m in events), F(0)) >= 1:
        return
    p = build_path(events)
    g, a = rotate_at_argmin(p, "bridge")
    xs = [F(i, 200) for i in range(201)]
    vals = [g(x) for x in xs]
    assert min(vals) >= 0
    assert g(F(0)) == 0 or a in p.positions


def test_excursion_examples():
    d = excursions_above_min(build_path([(F(1, 10), F(3, 10)), (F(6, 10), F(2, 10))]))
    assert sorted(d.lengths) == [F(2, 10), F(3, 10)]
    d = excursions_above_min(build_path([(F(1, 10), F(3, 10)), (F(35, 100), F(2, 10))]))
    assert d.lengths == [F(5, 10)]
    assert excursions_above_min(build_path([(F(1, 3), F(0)), (F(2, 3), F(0))])).excursions == []


def test_touching_blocks_merge():
    # [0.1, 0.3] then a mass arriving exactly at 0.3
    d = excursions_above_min(build_path([(F(1, 10), F(2, 10)), (F(3, 10), F(1, 10))]))
    assert d.lengths == [F(3, 10)]


events_strategy = st.lists(
    st.tuples(st.integers(0, 96).map(lambda i: F(i, 97)), st.integers(1, 12).map(lambda i: F(i, 97))),
    min_size=1, max_size=7)


@settings(max_examples=300, deadline=None)
@given(events_strategy)
def test_lemma_excursions_are_rdcs_blocks(events):
    if sum((m for _, m in events), F(0)) >= 1:
        return
    cfg = OccupiedConfig()
    for u, m in events:
        cfg, _ = relax(cfg, MassEvent(u, m), RDCS())
    d = excursions_above_min(build_path(events))
    assert Counter(d.lengths) == Counter(cfg.lengths())
    assert sorted(e.start % 1 for e in d.excursions) == sorted(c.start for c in cfg.components)


@settings(max_examples=100, deadline=None)
@given(events_strategy, st.sampled_from([0, F(1, 2), 2]))
def test_reflected_integral_two_ways(events, lam):
    if sum((m for _, m in events), F(0)) >= 1:
        return
    p = build_path(events)
    exact = reflected_integral(p, lam)
    grid = trapezoid(reflected_profile(p, float(lam), grid=20001))
    assert float(exact) == pytest.approx(grid, abs=2e-4)


def test_reflected_integral_pointwise_cases():
    # one block of length 0.3: a triangle of height 0.3 and base 0.3
    p = build_path([(F(1, 10), F(3, 10))])
    assert reflected_integral(p) == F(9, 200)
    # the profile is read from the argmin (here 1), so the jump sits at 0.1
    prof = reflected_profile(p, 0.0, grid=11)
    assert prof[2] == pytest.approx(0.2) and prof[3] == pytest.approx(0.1)
    assert prof[0] == 0.0 and prof[4] == pytest.approx(0.0, abs=1e-12)
    # two separate blocks
    p = build_path([(F(1, 10), F(3, 10)), (F(6, 10), F(2, 10))])
    assert reflected_integral(p) == F(9, 200) + F(4, 200)
    # with tilt, the block shortens: height 0.3, slope 2
    p = build_path([(F(1, 10), F(3, 10))])
    assert reflected_integral(p, 1) == F(9, 400)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 8))
def test_batch_matches_engine(seed, k):
    rng = np.random.default_rng(seed)
    T = 20
    u = rng.random((T, k))
    masses = rng.dirichlet(np.ones(k + 1))[:k] * 0.9
    lengths, starts = rdcs_blocks_batch(u, masses)
    for t in range(T):
        cfg = OccupiedConfig()
        for x, m in zip(u[t], masses):
            cfg, _ = relax(cfg, MassEvent(float(x), float(m)), RDCS())
        got = labeled_from_blocks(lengths[t], starts[t])
        assert got == pytest.approx(rotated_lengths(cfg), abs=1e-12)
