import math
from fractions import Fraction as F

import numpy as np
import pytest

from dispersal.excursions import (
    closed_form_mean_id, closed_form_mean_power, excursion_intervals, fragmentation_tree,
    largest_excursions, m_lambda_functional, m_lambda_functional_grid, polya_exact_mean,
    polya_fluid, polya_fluid_check, polya_mean_recursion, polya_simulate, record_indices,
    reflected_area, sample_excursion, truncated_mean, truncation_deficit,
)

ident = lambda l: l


def test_closed_form_mean_id():
    assert closed_form_mean_id(0.0) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-14)
    vals = [closed_form_mean_id(l) for l in (0, 0.5, 1, 2, 5, 30)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    # large lam: sqrt(pi/2) erfcx(lam/sqrt2) ~ 1/lam
    assert closed_form_mean_id(1e4) == pytest.approx(1e-4, rel=1e-6)
    with pytest.raises(ValueError):
        closed_form_mean_id(-1)


@pytest.mark.parametrize("m", [1, 2, 3, 5])
def test_length_density_normalised(m):
    assert closed_form_mean_power(m, 0.0, without_length_factor=True) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("lam", [0.0, 0.5, 1.0, 3.0])
def test_power_one_is_identity(lam):
    assert closed_form_mean_power(1, lam) == pytest.approx(closed_form_mean_id(lam), rel=1e-8)


@pytest.mark.parametrize("lam,eps", [(0.0, 0.02), (0.5, 0.02), (1.0, 0.05), (2.0, 0.1)])
def test_truncated_plus_deficit_is_closed_form(lam, eps):
    total = truncated_mean(ident, lam, eps) + truncation_deficit(lam, eps)
    assert total == pytest.approx(closed_form_mean_id(lam), rel=1e-7)


def test_deficit_is_order_sqrt_eps():
    d1, d2 = truncation_deficit(0.0, 0.01), truncation_deficit(0.0, 0.0025)
    assert d1 / d2 == pytest.approx(2.0, rel=0.02)


def test_sampled_excursion_shape():
    e = sample_excursion(1024, np.random.default_rng(4))
    assert e.N == 1024
    assert e.values[0] == 0 and e.values[-1] == 0
    assert e.values.min() >= 0 and e.values.max() > 0
    with pytest.raises(ValueError):
        sample_excursion(10, np.random.default_rng(0))


def test_record_indices():
    assert list(record_indices(np.array([0.0, -1.0, 0.5, -1.0, -2.0]))) == [0, 1, 4]


def test_largest_excursions_bounds():
    e = sample_excursion(2048, np.random.default_rng(8))
    for lam in (0.0, 1.0, 4.0):
        top = largest_excursions(e, lam, 3)
        assert len(top) == 3 and top == sorted(top, reverse=True)
        assert all(0 <= x <= 1 for x in top) and sum(top) <= 1 + 1e-12
        total = sum((b - a) for a, b in excursion_intervals(e, lam)) / e.N
        assert total == pytest.approx(1.0)


def test_fragmentation_tree_lifetimes():
    e = sample_excursion(2048, np.random.default_rng(12))
    tree = fragmentation_tree(e, 0.01)
    root = [f for f in tree if (f.p, f.q) == (0, e.N)]
    assert len(root) == 1 and root[0].born == 0.0
    # ties on the grid give zero-lifetime children
    assert all(f.death >= f.born for f in tree)
    assert all(f.length >= 0.01 for f in tree)


@pytest.mark.parametrize("lam", [0.0, 0.5, 2.0])
def test_tree_functional_equals_twice_reflected_area(lam):
    # with no cutoff, int_lam^inf sum l_t^2 dt is twice the reflected area
    for seed in (1, 2):
        e = sample_excursion(4096, np.random.default_rng(seed))
        tree_val = m_lambda_functional(ident, e, lam, 1 / e.N)
        assert tree_val == pytest.approx(2 * reflected_area(e, lam), abs=1e-4)


@pytest.mark.parametrize("lam,eps", [(0.0, 0.05), (1.0, 0.05), (0.5, 0.1)])
def test_tree_functional_matches_slope_sweep(lam, eps):
    e = sample_excursion(4096, np.random.default_rng(21))
    a = m_lambda_functional(ident, e, lam, eps)
    b = m_lambda_functional_grid(ident, e, lam, eps)
    assert a == pytest.approx(b, rel=0.01)


def test_functional_accepts_scalar_only_g():
    e = sample_excursion(1024, np.random.default_rng(3))
    a = m_lambda_functional(lambda l: math.sqrt(l), e, 0.5, 0.05)
    b = m_lambda_functional(np.sqrt, e, 0.5, 0.05)
    assert a == pytest.approx(b, rel=1e-12)


def test_mean_area_of_excursion():
    rng = np.random.default_rng(2024)
    areas = [reflected_area(sample_excursion(2**14, rng), 0.0) for _ in range(10**4)]
    assert np.mean(areas) == pytest.approx(math.sqrt(math.pi / 8), rel=0.02)


def test_polya_exact_mean_equals_recursion():
    for a0, b0, T in [(5, 5, 20), (1, 3, 15), (7, 2, 10)]:
        exact = polya_exact_mean(a0, b0, T)
        rec = polya_mean_recursion(a0, b0, T)
        assert all(isinstance(x, F) for x in exact)
        assert [float(x) for x in exact] == pytest.approx(list(rec), rel=1e-12)


def test_polya_simulation_conserves_balls():
    b = polya_simulate(3, 4, 30, np.random.default_rng(0), runs=50)
    steps = np.diff(b, axis=1)
    assert set(np.unique(steps)) <= {0, 1}
    assert b[:, 0].tolist() == [4] * 50


def test_polya_fluid_limit():
    assert polya_fluid(1.0, 0.5, np.array([0.0]))[0] == pytest.approx(0.5)
    err = polya_fluid_check(1.0, 0.5, 10**5, 2.0, np.random.default_rng(6))
    assert err < 1e-2
    with pytest.raises(ValueError):
        polya_fluid_check(0.0, 1.0, 100, 1.0, np.random.default_rng(0))
