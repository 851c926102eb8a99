import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from girsanov_lab import jumps as jmp
from girsanov_lab.entropy_core import theta, theta_star
from girsanov_lab.orlicz import (
    WeightedSample,
    energy_estimate,
    energy_split,
    hpr_membership,
    luxemburg_norm,
    orlicz_holder_check,
    young_integral,
)
from girsanov_lab.path_model import TimeGrid

YOUNG = {"theta": theta, "theta_star": theta_star}


def test_zero_norm():
    assert luxemburg_norm(WeightedSample([0.0, 0.0], [1.0, 2.0])).value == 0.0


@pytest.mark.parametrize("young", ["theta", "theta_star"])
@pytest.mark.parametrize("c, m", [(1.0, 1.0), (3.0, 0.7), (0.2, 5.0), (10.0, 0.01)])
def test_single_atom_root(young, c, m):
    phi = YOUNG[young]
    oracle = brentq(lambda a: phi(c / a) * m - 1.0, 1e-6, 1e6, xtol=1e-14, rtol=1e-15)
    assert luxemburg_norm(WeightedSample([c], [m]), young).value == pytest.approx(oracle, rel=1e-8)


def test_zero_mass_atoms_ignored():
    a = luxemburg_norm(WeightedSample([2.0, 1e9], [1.0, 0.0])).value
    assert a == luxemburg_norm(WeightedSample([2.0], [1.0])).value


def test_unknown_young():
    with pytest.raises(ValueError):
        luxemburg_norm(WeightedSample([1.0], [1.0]), "square")


@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10), st.sampled_from(["theta", "theta_star"]))
@settings(max_examples=40)
def test_homogeneity_and_triangle(seed, lam, young):
    rng = np.random.default_rng(seed)
    m = rng.random(8)
    f, g = rng.normal(size=(2, 8))
    nf = luxemburg_norm(WeightedSample(f, m), young).value
    assert luxemburg_norm(WeightedSample(lam * f, m), young).value == pytest.approx(lam * nf, rel=1e-8)
    ng = luxemburg_norm(WeightedSample(g, m), young).value
    assert luxemburg_norm(WeightedSample(f + g, m), young).value <= nf + ng + 1e-8


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_normalised_young_integral_is_one(seed):
    rng = np.random.default_rng(seed)
    h = WeightedSample(rng.normal(size=6), rng.random(6))
    a = luxemburg_norm(h).value
    val = young_integral(h, a)
    assert val <= 1 + 1e-8
    assert val == pytest.approx(1.0, abs=1e-6)


def test_holder_trivial():
    m = np.ones(3)
    c = orlicz_holder_check(WeightedSample([1.0, 2.0, 3.0], m), WeightedSample(np.zeros(3), m))
    assert c.lhs == 0.0 and c.rhs == 0.0 and c.holds


def test_holder_requires_shared_measure():
    with pytest.raises(ValueError):
        orlicz_holder_check(WeightedSample([1.0], [1.0]), WeightedSample([1.0], [2.0]))


def test_holder_tension_case():
    rng = np.random.default_rng(1)
    m = rng.random(20)
    u = WeightedSample(rng.random(20), m)
    u = u.with_values(u.values / luxemburg_norm(u).value)
    z = u.with_values(np.expm1(u.values))
    c = orlicz_holder_check(z, u)
    assert 0.4 < c.lhs / c.rhs <= 1.0


@pytest.mark.parametrize("ell, expected", [(1.0, 0.0), (2.0, 2 * math.log(2) - 1), (0.0, 2 * math.log(2) - 1)])
def test_energy_estimate_examples(ell, expected):
    assert energy_estimate(WeightedSample([ell], [1.0])) == pytest.approx(expected, abs=1e-15)


def test_energy_split_equivalence():
    ell = np.linspace(1e-6, 10, 20001)
    ell = ell[ell != 1.0]
    e = theta_star(np.abs(ell - 1))
    low, high = np.where(ell <= 2, (ell - 1) ** 2, 0), np.where(ell > 2, ell * np.log(ell), 0)
    ratio = e / (low + high)
    assert ratio.min() >= 0.25 and ratio.max() <= 4
    low_i, high_i = energy_split(WeightedSample(ell, np.ones_like(ell)))
    assert low_i == pytest.approx(low.sum()) and high_i == pytest.approx(high.sum())


def test_hpr_examples():
    grid = TimeGrid.uniform(16)
    unit = jmp.JumpSpec(jmp.DiscreteKernel([1.0], [1.0]))
    zero = hpr_membership(lambda t, q: np.zeros(np.shape(t)), unit, grid, 2, 2)
    assert zero.small_moment == 0.0 and zero.large_moment == 0.0
    res = hpr_membership(lambda t, q: q[..., 0], unit, grid, 2, 0)
    assert res.small_moment == pytest.approx(1.0) and res.large_moment == 0.0 and res.member


def test_hpr_uniform_against_brute_force():
    grid = TimeGrid.uniform(4)
    spec = jmp.JumpSpec(jmp.UniformKernel(0.0, 2.0, 1.0))
    res = hpr_membership(lambda t, q: q[..., 0], spec, grid, 2.0, 3.0)
    q = (np.arange(10**6) + 0.5) / 10**6 * 2.0
    dens = 0.5 * 2.0 / 10**6
    small = np.sum(np.where(q <= 1, q ** 2, 0)) * dens
    large = np.sum(np.where(q > 1, q ** 3, 0)) * dens
    assert res.small_moment == pytest.approx(small, abs=1e-6)
    assert res.large_moment == pytest.approx(large, abs=1e-6)


def test_hpr_infinite_flag():
    spec = jmp.JumpSpec(jmp.DiscreteKernel([0.5, 2.0], [1.0, 1.0]))
    res = hpr_membership(lambda t, q: np.where(q[..., 0] > 1, np.inf, 1.0), spec, TimeGrid.uniform(4), 2, 2)
    assert res.small_finite and not res.large_finite and not res.member


def test_sample_from_kernel():
    spec = jmp.JumpSpec(jmp.DiscreteKernel([1.0, -1.0], [0.3, 0.7]))
    s = WeightedSample.from_kernel(lambda t, q: q[..., 0], spec, TimeGrid.uniform(10))
    assert s.total_mass == pytest.approx(1.0)
    assert s.integral() == pytest.approx(-0.4)
