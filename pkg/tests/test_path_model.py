import io
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from girsanov_lab.path_model import (
    CadlagPath,
    JumpCollisionWarning,
    JumpMark,
    TimeGrid,
    csv_header_comment,
    realized_qv,
    refine_with_jumps,
    stieltjes_integral,
)


def test_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid([0.0, 0.5, 0.4, 1.0])
    with pytest.raises(ValueError):
        TimeGrid([0.1, 1.0])
    with pytest.raises(ValueError):
        TimeGrid.uniform(0)
    g = TimeGrid.uniform(4)
    assert g.n_intervals == 4
    assert g.points[-1] == 1.0
    with pytest.raises(ValueError):
        g.points[1] = 0.3


def test_stieltjes_examples():
    assert stieltjes_integral(np.zeros(3), [0.5, 0.5, 0.5]) == 0.0
    assert stieltjes_integral([1, 2, 3], [0.5, 0.5, 0.5]) == 3.0
    v = np.array([1.0, -2.0])
    inc = np.array([[0.1, 0.2], [0.3, -0.4], [0.6, 0.2]])
    assert stieltjes_integral(np.tile(v, (3, 1)), inc) == pytest.approx(v @ inc.sum(axis=0), abs=1e-15)


def test_stieltjes_length_mismatch():
    with pytest.raises(ValueError, match="length mismatch"):
        stieltjes_integral([1, 2], [1, 2, 3])


@given(st.integers(1, 30), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**32 - 1))
@settings(max_examples=50)
def test_stieltjes_bilinear(n, a, b, seed):
    rng = np.random.default_rng(seed)
    f, g, dx, dy = rng.normal(size=(4, n))
    lhs = stieltjes_integral(a * f + b * g, dx)
    rhs = a * stieltjes_integral(f, dx) + b * stieltjes_integral(g, dx)
    assert lhs == pytest.approx(rhs, abs=1e-12)
    lhs = stieltjes_integral(f, a * dx + b * dy)
    rhs = a * stieltjes_integral(f, dx) + b * stieltjes_integral(f, dy)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_qv_constant_path():
    g = TimeGrid.uniform(8)
    qv = realized_qv(CadlagPath(g, np.full(9, 2.5)))
    assert np.all(qv == 0)


def test_qv_pure_jump_excluded():
    g = refine_with_jumps(TimeGrid.uniform(4), [0.3])
    vals = np.where(g.points >= 0.3, 2.0, 0.0)
    p = CadlagPath(g, vals, (JumpMark(0.3, 2.0),))
    assert realized_qv(p)[-1, 0, 0] == pytest.approx(4.0)
    assert np.all(realized_qv(p, continuous_part_only=True) == 0)


@pytest.mark.parametrize("n", [4, 16, 100])
def test_qv_straight_line(n):
    g = TimeGrid.uniform(n)
    qv = realized_qv(CadlagPath(g, g.points))
    assert qv[-1, 0, 0] == pytest.approx(1.0 / n)


def test_qv_psd_and_symmetric():
    rng = np.random.default_rng(0)
    g = TimeGrid.uniform(20)
    p = CadlagPath(g, np.cumsum(rng.normal(size=(21, 3)), axis=0))
    qv = realized_qv(p)
    assert np.allclose(qv, np.swapaxes(qv, 1, 2))
    assert np.min(np.linalg.eigvalsh(qv)) > -1e-12


def test_refine_examples():
    g = TimeGrid([0.0, 0.5, 1.0])
    assert refine_with_jumps(g, []) == g
    assert refine_with_jumps(g, [0.25]).points.tolist() == [0.0, 0.25, 0.5, 1.0]
    assert refine_with_jumps(g, [0.5]) == g


@given(st.lists(st.floats(1e-6, 1.0), max_size=12), st.integers(1, 20))
def test_refine_idempotent(times, n):
    g = TimeGrid.uniform(n)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", JumpCollisionWarning)
        once = refine_with_jumps(g, times)
        twice = refine_with_jumps(once, times)
    assert once == twice
    assert np.all(np.isin(g.points, once.points))


def test_refine_collision_moves_one_ulp():
    t = 0.3
    with pytest.warns(JumpCollisionWarning):
        g = refine_with_jumps(TimeGrid.uniform(2), [t, t])
    assert g.points.tolist() == [0.0, t, np.nextafter(t, 1.0), 0.5, 1.0]


def test_refine_rejects_outside():
    with pytest.raises(ValueError):
        refine_with_jumps(TimeGrid.uniform(2), [0.0])


def test_jump_mark_and_path_validation():
    with pytest.raises(ValueError):
        JumpMark(0.5, 0.0)
    with pytest.raises(ValueError):
        JumpMark(0.0, 1.0)
    g = TimeGrid.uniform(4)
    with pytest.raises(ValueError, match="grid points"):
        CadlagPath(g, np.zeros(5), (JumpMark(0.3, 1.0),))
    with pytest.raises(ValueError):
        CadlagPath(g, np.array([0, 1, np.nan, 0, 0.0]))
    with pytest.raises(ValueError):
        CadlagPath(g, np.zeros((5, 17)))


def test_header_comment():
    assert csv_header_comment("1.2.3") == "# girsanov-lab v1.2.3 schema=1"
