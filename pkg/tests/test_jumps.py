import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from girsanov_lab import jumps as jmp
from girsanov_lab.entropy_core import theta_star
from girsanov_lab.laws import PointMass
from girsanov_lab.path_model import CadlagPath, JumpMark, TimeGrid, refine_with_jumps

GRID = TimeGrid.uniform(32)
UNIT = jmp.JumpSpec(jmp.DiscreteKernel([1.0], [1.0]))
TWO = jmp.JumpSpec(jmp.DiscreteKernel([[1.0], [-1.0]], [0.5, 0.5]))
LOG2 = math.log(2)


def const(c):
    return lambda t, q: np.full(np.shape(t), float(c))


def test_kernel_validation():
    with pytest.raises(ValueError):
        jmp.DiscreteKernel([0.0], [1.0])
    with pytest.raises(ValueError):
        jmp.DiscreteKernel([1.0], [-1.0])
    with pytest.raises(ValueError):
        jmp.UniformKernel(1.0, 0.0)


def test_time_dependent_rate_needs_bound():
    with pytest.raises(ValueError):
        jmp.JumpSpec(jmp.DiscreteKernel([1.0], [1.0]), rate=lambda t: 1 + t)


def test_zero_kernel_is_deterministic():
    spec = jmp.JumpSpec(jmp.DiscreteKernel([1.0], [0.0]), drift=lambda t: np.asarray(t)[:, None] * 0.5,
                        initial_law=PointMass([2.0]))
    ens = jmp.simulate_reference_jumps(spec, GRID, 20, seed=1)
    assert ens.n_jumps.sum() == 0
    p = ens.path(3)
    assert np.allclose(p.values[:, 0], 2.0 + 0.5 * GRID.points)


def test_unit_jump_count_is_poisson():
    ens = jmp.simulate_reference_jumps(UNIT, GRID, 50_000, seed=2)
    n = ens.n_jumps
    assert abs(n.mean() - 1.0) < 3 * n.std() / np.sqrt(n.size)


def test_compensated_form_pathwise():
    ens = jmp.simulate_reference_jumps(UNIT, GRID, 50, seed=3)
    for i in range(50):
        p = ens.path(i)
        t = p.grid.points
        n_t = np.array([sum(j.time <= s for j in p.jumps) for s in t])
        assert np.allclose(p.values[:, 0] - p.values[0, 0] + t, n_t, atol=1e-12)


def test_time_dependent_rate():
    spec = jmp.JumpSpec(jmp.DiscreteKernel([2.0], [1.0]), rate=lambda t: 2 * np.asarray(t), rate_bound=2.0)
    ens = jmp.simulate_reference_jumps(spec, GRID, 40_000, seed=4)
    n = ens.n_jumps
    assert abs(n.mean() - 1.0) < 3 * n.std() / np.sqrt(n.size)
    late = np.mean(ens.jump_times > 0.5)
    assert late == pytest.approx(0.75, abs=0.02)


def test_thinning_ratio_error_names_time():
    spec = jmp.JumpSpec(jmp.DiscreteKernel([1.0], [1.0]), rate=lambda t: 2 * np.asarray(t), rate_bound=1.0)
    with pytest.raises(ValueError, match=r"at t="):
        jmp.simulate_reference_jumps(spec, GRID, 200, seed=1)


def test_unbounded_tilt_demands_bound():
    spec = jmp.JumpSpec(jmp.UniformKernel(0.0, 1.0))
    tilt = jmp.TiltField(lambda t, q: 1.0 / np.asarray(q)[..., 0])
    with np.errstate(divide="ignore"):
        with pytest.raises(ValueError, match="bound"):
            jmp.simulate_tilted_jumps(spec, tilt, GRID, 10, seed=1)


def test_underestimated_tilt_bound_is_hard_error():
    tilt = jmp.TiltField(const(3.0), bound=2.0)
    with pytest.raises(ValueError, match="thinning ratio"):
        jmp.simulate_tilted_jumps(UNIT, tilt, GRID, 100, seed=1)


def test_unit_tilt_bit_identical():
    r = jmp.simulate_reference_jumps(TWO, GRID, 500, seed=8)
    p = jmp.simulate_tilted_jumps(TWO, jmp.TiltField.constant(1.0), GRID, 500, seed=8)
    for f in ("x0", "jump_times", "jump_sizes", "jump_offsets"):
        assert np.array_equal(getattr(r, f), getattr(p, f))
    assert np.array_equal(r.path(0).values, p.path(0).values)


def test_tilted_count_mean():
    ens = jmp.simulate_tilted_jumps(UNIT, jmp.TiltField.constant(2.0), GRID, 40_000, seed=9)
    n = ens.n_jumps
    assert abs(n.mean() - 2.0) < 3 * n.std() / np.sqrt(n.size)


def test_tilt_kills_jump_type():
    spec = jmp.JumpSpec(jmp.DiscreteKernel([[1.0], [-1.0]], [1.0, 1.0]))
    tilt = jmp.TiltField.per_atom([1.0, -1.0], [2.0, 0.0])
    ens = jmp.simulate_tilted_jumps(spec, tilt, GRID, 5_000, seed=10)
    assert np.all(ens.jump_sizes > 0)


def test_seed_determinism_across_workers():
    tilt = jmp.TiltField.per_atom([1.0, -1.0], [1.5, 0.4])
    a = jmp.simulate_tilted_jumps(TWO, tilt, GRID, 1000, seed=3, block_size=64, workers=1)
    b = jmp.simulate_tilted_jumps(TWO, tilt, GRID, 1000, seed=3, block_size=100, workers=3)
    for f in ("x0", "jump_times", "jump_sizes", "jump_offsets"):
        assert np.array_equal(getattr(a, f), getattr(b, f))


def test_compensated_integral_examples():
    ens = jmp.simulate_reference_jumps(UNIT, GRID, 20_000, seed=5)
    p = ens.path(0)
    assert jmp.compensated_integral(const(0.0), p, UNIT) == 0.0
    c = jmp.compensated_integrals(const(1.0), ens, UNIT)
    assert np.array_equal(c, ens.n_jumps - 1.0)
    assert abs(c.mean()) < 3 * c.std() / np.sqrt(c.size)

    g = refine_with_jumps(GRID, [0.5])
    path = CadlagPath(g, np.where(g.points >= 0.5, 2.0, 0.0), (JumpMark(0.5, 2.0),))
    spec = jmp.JumpSpec(jmp.DiscreteKernel([1.0, 3.0], [0.25, 0.5]))
    m = 1.0 * 0.25 + 3.0 * 0.5
    assert jmp.compensated_integral(lambda t, q: q[..., 0], path, spec) == pytest.approx(2.0 - m, abs=1e-14)


def test_non_finite_quadrature_names_cell():
    with pytest.raises(ValueError, match="cell t="):
        jmp.kernel_integral(UNIT, GRID, lambda t, q: np.full(np.shape(t), np.inf))


def test_uniform_quadrature_against_dense_sum():
    spec = jmp.JumpSpec(jmp.UniformKernel(-2.0, 2.0, 3.0))
    f = lambda t, q: np.where(np.abs(q[..., 0]) <= 1, q[..., 0] ** 2, np.cos(q[..., 0]))  # noqa: E731
    q = -2 + 4 * (np.arange(2_000_000) + 0.5) / 2_000_000
    dense = np.mean(np.where(np.abs(q) <= 1, q * q, np.cos(q))) * 3.0
    assert jmp.kernel_integral(spec, GRID, f) == pytest.approx(dense, abs=1e-6)


def test_truncated_power_kernel_mass_and_truncation():
    k = jmp.TruncatedPowerKernel(alpha=1.2, eps=0.05, q_max=4.0)
    nodes, w = k.quadrature()
    assert w.sum() == pytest.approx(k.total_mass, rel=1e-10)
    spec = jmp.JumpSpec(k)
    assert spec.truncation == 0.05
    assert spec.square_moment(GRID) < np.inf
    ens = jmp.simulate_reference_jumps(spec, GRID, 2000, seed=1)
    assert np.all(np.abs(ens.jump_sizes) >= 0.05)
    assert ens.metadata["truncation"] == 0.05


def test_log_density_unit_tilt():
    ens = jmp.simulate_reference_jumps(TWO, GRID, 30, seed=2)
    for i in range(30):
        w = jmp.log_density_jump(ens.path(i), jmp.TiltField.constant(1.0), TWO)
        assert w.log_z_plus == 0.0 and w.log_z_minus == 0.0 and w.log_z == w.log_init == 0.0


def test_log_density_poisson_likelihood_ratio():
    tilt = jmp.TiltField.constant(2.0)
    ens = jmp.simulate_reference_jumps(UNIT, GRID, 40, seed=6)
    for i in range(40):
        n = int(ens.n_jumps[i])
        w = jmp.log_density_jump(ens.path(i), tilt, UNIT)
        assert w.log_z == pytest.approx(n * LOG2 - 1.0, abs=1e-12)
        assert jmp.alt_product_density(ens.path(i), tilt, UNIT) == pytest.approx(math.exp(-1) * 2.0 ** n, rel=1e-12)


def test_zero_tilt_at_jump_kills_density():
    tilt = jmp.TiltField.per_atom([1.0, -1.0], [2.0, 0.0])
    ens = jmp.simulate_reference_jumps(TWO, GRID, 400, seed=7)
    w = jmp.jump_weights(ens, tilt, TWO)
    hit = np.array([np.any(ens.jump_slice(i)[1] < 0) for i in range(len(ens))])
    assert np.array_equal(w.tau_minus_hit, hit)
    assert np.all(np.exp(w.log_z[hit]) == 0.0)
    with pytest.raises(ValueError, match="refused"):
        jmp.alt_product_densities(ens, tilt, TWO)


def test_unit_tilt_product_is_initial_ratio():
    ens = jmp.simulate_reference_jumps(TWO, GRID, 10, seed=1)
    assert np.all(jmp.alt_product_densities(ens, jmp.TiltField.constant(1.0), TWO) == 1.0)


def test_single_path_matches_ensemble_ledgers():
    rng = np.random.default_rng(0)
    vals = rng.uniform(0.2, 5, 2)
    tilt = jmp.TiltField.per_atom([1.0, -1.0], vals)
    ens = jmp.simulate_reference_jumps(TWO, GRID, 50, seed=4)
    w = jmp.jump_weights(ens, tilt, TWO)
    for i in range(50):
        one = jmp.log_density_jump(ens.path(i), tilt, TWO)
        assert one.log_z == pytest.approx(w.log_z[i], abs=1e-12)


@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0), st.sampled_from([0.1, 0.5, 0.9]))
@settings(max_examples=25, deadline=None)
def test_threshold_invariance(a, b, alpha):
    tilt = jmp.TiltField.per_atom([1.0, -1.0], [a, b])
    ens = jmp.simulate_reference_jumps(TWO, GRID, 200, seed=11)
    base = jmp.jump_weights(ens, tilt, TWO, alpha=0.5).log_z
    moved = jmp.jump_weights(ens, tilt, TWO, alpha=alpha).log_z
    assert np.max(np.abs(base - moved)) < 1e-10


def test_threshold_must_lie_in_unit_interval():
    ens = jmp.simulate_reference_jumps(UNIT, GRID, 10, seed=1)
    with pytest.raises(ValueError):
        jmp.jump_weights(ens, jmp.TiltField.constant(2.0), UNIT, alpha=1.0)


def test_martingale_zero_h_is_exact():
    rep = jmp.exp_martingale_jump_check(const(0.0), UNIT, GRID, 500, seed=1)
    assert rep.mean == 1.0 and rep.stderr == 0.0


def test_martingale_constant_h_closed_form():
    c = 0.7
    ens = jmp.simulate_reference_jumps(UNIT, GRID, 20, seed=2)
    z = jmp.exponential_martingale_values(const(c), ens, UNIT)
    assert np.allclose(z, np.exp(c * ens.n_jumps - math.exp(c) + 1), rtol=1e-12)


def test_martingale_killed_variant():
    h = lambda t, q: np.where(q[..., 0] > 0, -np.inf, 0.2)  # noqa: E731
    rep = jmp.exp_martingale_jump_check(h, TWO, GRID, 40_000, seed=5)
    assert not rep.flagged and rep.supermartingale_ok
    assert rep.killed_fraction == pytest.approx(1 - math.exp(-0.5), abs=0.01)


def test_entropy_decomposition_examples():
    ens = jmp.simulate_tilted_jumps(UNIT, jmp.TiltField.constant(2.0), GRID, 100, seed=1)
    assert jmp.entropy_decomposition_jump(ens, jmp.TiltField.constant(1.0), UNIT, 0.0).value == 0.0
    assert jmp.entropy_decomposition_jump(ens, jmp.TiltField.constant(2.0), UNIT, 0.0).value == pytest.approx(
        2 * LOG2 - 1, abs=1e-12)
    assert jmp.entropy_decomposition_jump(ens, jmp.TiltField.constant(0.0), UNIT, 0.0).value == pytest.approx(1.0)


def test_entropy_plugin_examples():
    one = jmp.TiltField.constant(1.0)
    ens = jmp.simulate_tilted_jumps(UNIT, one, GRID, 500, seed=1)
    assert jmp.entropy_plugin_jump(ens, one, UNIT).value == 0.0
    two = jmp.TiltField.constant(2.0)
    ens = jmp.simulate_tilted_jumps(UNIT, two, GRID, 50_000, seed=2)
    est = jmp.entropy_plugin_jump(ens, two, UNIT)
    assert abs(est.value - (2 * LOG2 - 1)) < 3 * est.stderr


def test_plugin_and_decomposition_agree_random_tilt():
    vals = np.random.default_rng(5).uniform(0.2, 5, 2)
    tilt = jmp.TiltField.per_atom([1.0, -1.0], vals)
    ens = jmp.simulate_tilted_jumps(TWO, tilt, GRID, 50_000, seed=6)
    plug = jmp.entropy_plugin_jump(ens, tilt, TWO)
    dec = jmp.entropy_decomposition_jump(ens, tilt, TWO, 0.0)
    assert abs(plug.value - dec.value) < 3 * math.hypot(plug.stderr, dec.stderr)


def test_tau_census():
    spec = jmp.JumpSpec(jmp.DiscreteKernel([[1.0], [-1.0]], [1.0, 1.0]))
    floor = jmp.TiltField.per_atom([1.0, -1.0], [0.2, 3.0])
    ens = jmp.simulate_tilted_jumps(spec, floor, GRID, 2_000, seed=1)
    assert jmp.tau_minus_census(ens, floor)[8] == 0
    dead = jmp.TiltField.per_atom([1.0, -1.0], [0.0, 1.0])
    ens = jmp.simulate_tilted_jumps(spec, dead, GRID, 2_000, seed=2)
    assert all(v == 0 for v in jmp.tau_minus_census(ens, dead).values())


def test_importance_closure_jump_count():
    tilt = jmp.TiltField.per_atom([1.0, -1.0], [1.8, 0.6])
    r = jmp.simulate_reference_jumps(TWO, GRID, 40_000, seed=31)
    p = jmp.simulate_tilted_jumps(TWO, tilt, GRID, 40_000, seed=32)
    for f in (lambda e: e.n_jumps, lambda e: e.terminal[:, 0]):
        res = jmp.importance_sample_jump(r, tilt, TWO, f)
        direct = np.asarray(f(p), dtype=float)
        assert abs(res.estimate - direct.mean()) < 3 * math.hypot(res.stderr, direct.std() / math.sqrt(direct.size))


def test_drift_correction_matches_tilted_compensator():
    spec = jmp.JumpSpec(jmp.DiscreteKernel([[0.5], [-2.0]], [1.0, 1.0]))
    tilt = jmp.TiltField.per_atom([0.5, -2.0], [3.0, 0.5])
    ens = jmp.simulate_tilted_jumps(spec, tilt, GRID, 5, seed=1)
    t = GRID.points
    # B-hat = int 1{|q|<=1}(ell-1) q dL: only the small atom contributes: (3-1)*0.5*t
    # tilted compensator of small jumps: 3*0.5*t
    assert np.allclose(ens.drift_part(t)[:, 0], (2 * 0.5 - 3 * 0.5) * t, atol=1e-14)


@pytest.mark.parametrize("ell", np.geomspace(1e-3, 10, 7))
def test_theta_star_link(ell):
    assert theta_star(ell - 1) == pytest.approx(ell * math.log(ell) - ell + 1, abs=1e-12)
