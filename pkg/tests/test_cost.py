import itertools
import math
from collections import defaultdict
from fractions import Fraction as F

import numpy as np
import pytest

from dispersal.cost import (
    ClosestPlace, PWalk, StandardParking, SymmetricWalk, _exit_moments, insertion_size_pmf,
    make_cost_model, scaled_cost_experiment, theta_measure, total_cost,
)
from dispersal.discrete import park


def test_standard_realized_cost():
    s = park(5, [2, 2, 4])
    assert total_cost(s, StandardParking()) == 4.0
    assert total_cost(park(5, []), StandardParking()) == 0.0
    assert total_cost(s, StandardParking(), upto=2) == 3.0


def test_isolated_cars_cost_one_each():
    s = park(10, [0, 3, 6])
    assert s.insertion_sizes == [0, 0, 0]
    rng = np.random.default_rng(0)
    for model in (ClosestPlace(), StandardParking(), PWalk(0.75), SymmetricWalk()):
        assert total_cost(s, model, rng) == 3.0


def test_cost_needs_rng_for_random_models():
    with pytest.raises(ValueError):
        total_cost(park(5, [1, 1]), ClosestPlace())


def test_insertion_size_pmf_examples():
    assert insertion_size_pmf(3, 1, 0) == F(2, 3)
    assert insertion_size_pmf(3, 1, 1) == F(1, 3)
    with pytest.raises(ValueError):
        insertion_size_pmf(3, 3, 0)


@pytest.mark.parametrize("n", [2, 5, 17, 50])
def test_insertion_size_pmf_sums_to_one(n):
    for m in range(n):
        assert sum(insertion_size_pmf(n, m, k) for k in range(m + 1)) == 1


@pytest.mark.parametrize("n", [4, 5])
def test_insertion_size_pmf_against_enumeration(n):
    for m in range(n):
        law = defaultdict(F)
        for word in itertools.product(range(n), repeat=m + 1):
            law[park(n, list(word)).insertion_sizes[m]] += F(1, n ** (m + 1))
        assert {k: insertion_size_pmf(n, m, k) for k in range(m + 1) if insertion_size_pmf(n, m, k)} == dict(law)


def test_closest_place_scaling():
    cp = ClosestPlace()
    s = 10**4
    assert cp.psi(s) / s == pytest.approx(0.25, rel=1e-3)
    assert cp.var(s) / s**2 == pytest.approx(1 / 48, rel=1e-3)
    assert cp.psi_inf(1.0) == 0.25
    # small case by hand: U in {0,1,2}, min(U, 2-U) = 0,1,0
    assert cp.psi(2) == pytest.approx(1 + 1 / 3)


@pytest.mark.parametrize("p", [0.6, 0.75, 1.0])
def test_pwalk_mean_two_ways(p):
    w = PWalk(p)
    for s in (1, 3, 10, 40):
        m1, _ = _exit_moments(s, p)
        assert w.psi(s) == pytest.approx(m1.mean(), rel=1e-10)
    assert w.psi(4000) / 4000 == pytest.approx(w.psi_inf(1.0), rel=1e-2)


def test_symmetric_walk_mean_two_ways():
    w = SymmetricWalk()
    for s in (1, 2, 7, 30):
        m1, _ = _exit_moments(s, 0.5)
        assert w.psi(s) == pytest.approx(m1.mean(), rel=1e-10)
    assert w.alpha(10) == 100.0
    assert w.psi_inf(1.0) == pytest.approx(1 / 6)


@pytest.mark.parametrize("model", [StandardParking(), ClosestPlace(), PWalk(0.75), SymmetricWalk()],
                         ids=repr)
def test_sampled_costs_match_mean(model):
    rng = np.random.default_rng(11)
    s, T = 12, 4000
    x = model.sample_many(np.full(T, s), rng)
    se = math.sqrt(model.var(s) / T)
    assert abs(x.mean() - model.psi(s)) < 4 * se


def test_make_cost_model():
    assert isinstance(make_cost_model("standard"), StandardParking)
    assert make_cost_model("pwalk:0.9").p == 0.9
    with pytest.raises(ValueError):
        make_cost_model("pwalk:0.4")
    with pytest.raises(ValueError):
        make_cost_model("teleport")


def test_theta_pairing():
    s = park(9, [1, 1, 1, 5])
    assert s.insertion_sizes == [0, 1, 2, 0]
    th = theta_measure(s)
    assert th.pair(lambda x: 1.0) == pytest.approx(2 / 3)
    assert th.pair(lambda x: x) == pytest.approx((1 / 9 + 2 / 9) / 3)
    assert th.pair(lambda x: 1.0, eps=0.2) == pytest.approx(1 / 3)
    # total mass is bounded by t / sqrt(n)
    rng = np.random.default_rng(5)
    big = park(400, rng.integers(0, 400, 300).tolist())
    th = theta_measure(big)
    assert th.pair(lambda x: 1.0) <= 300 / 20
    assert th.pair(lambda x: 1.0) == theta_measure(big).pair(lambda x: 1.0)


def test_scaled_cost_reproducible():
    a = scaled_cost_experiment(400, 0.5, StandardParking(), 5, seed=9)
    b = scaled_cost_experiment(400, 0.5, StandardParking(), 5, seed=9)
    assert np.array_equal(a, b)
    r = scaled_cost_experiment(400, 0.5, StandardParking(), 5, seed=9, realized=True)
    assert np.all(r > 0)
