import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from polymer_lab.potentials import (
    RadialPotential,
    scaled_ball_potential,
    unit_ball_potential,
)


def test_unit_ball_height_and_support():
    v = unit_ball_potential()
    assert v(0.0) == pytest.approx(math.pi**2 / 8.0, rel=1e-15)
    assert v(0.999) == pytest.approx(math.pi**2 / 8.0, rel=1e-15)
    # right-continuous: the step down happens exactly at the closing edge
    assert v(1.0) == 0.0
    assert v(1.0000001) == 0.0
    assert v.r_support == 1.0
    assert v.v_max == pytest.approx(math.pi**2 / 8.0)


def test_scaled_ball_height():
    v = scaled_ball_potential(0.5, 0.25)
    assert v(0.1) == pytest.approx(math.pi**2 / (8 * 0.25) + 0.5, rel=1e-15)
    assert v.r_support == 0.5


def test_scaled_ball_rejects_nonpositive_well():
    with pytest.raises(ValueError):
        scaled_ball_potential(1.0, -2.0)  # pi^2/8 - 2 < 0
    with pytest.raises(ValueError):
        scaled_ball_potential(0.0)


def test_vectorized_call_matches_scalar():
    v = scaled_ball_potential(0.5, 0.1)
    rs = np.array([0.0, 0.25, 0.5, 0.75, 2.0])
    vec = v(rs)
    assert vec.shape == rs.shape
    assert vec.tolist() == [v(float(r)) for r in rs]


def test_call_on_2d_array():
    v = unit_ball_potential()
    r = np.array([[0.5, 1.5], [0.0, 1.0]])
    out = v(r)
    assert out.shape == (2, 2)
    assert out[0, 1] == 0.0 and out[1, 0] > 0.0


def test_cumulative_is_exact_for_step_well():
    v = scaled_ball_potential(0.5, 0.0)
    h = v.v_max
    assert v.cumulative(0.2) == pytest.approx(0.2 * h, rel=1e-14)
    assert v.cumulative(0.5) == pytest.approx(0.5 * h, rel=1e-14)
    # flat beyond the support
    assert v.cumulative(3.0) == pytest.approx(0.5 * h, rel=1e-14)


def test_cell_averages_recover_step_values():
    v = RadialPotential(grid=np.array([0.0, 0.5, 1.0]), values=np.array([2.0, 0.5]))
    avg = v.cell_averages(np.array([0.0, 0.5, 1.0, 2.0]))
    assert avg[0] == pytest.approx(2.0, rel=1e-14)
    assert avg[1] == pytest.approx(0.5, rel=1e-14)
    assert avg[2] == pytest.approx(0.0, abs=1e-14)
    # a straddling cell averages exactly
    avg2 = v.cell_averages(np.array([0.25, 0.75]))
    assert avg2[0] == pytest.approx((0.25 * 2.0 + 0.25 * 0.5) / 0.5, rel=1e-14)


def test_csv_round_trip(tmp_path):
    v = RadialPotential(
        grid=np.array([0.0, 0.3, 0.7, 1.1]), values=np.array([3.0, 1.0, 0.25])
    )
    path = tmp_path / "well.csv"
    v.to_csv(path)
    back = RadialPotential.from_csv(path)
    assert np.array_equal(back.grid, v.grid)
    assert np.array_equal(back.values, v.values)


def test_csv_rejects_open_support(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("r,v\n0.0,2.0\n1.0,1.0\n")
    with pytest.raises(ValueError):
        RadialPotential.from_csv(path)


def test_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("radius,value\n0.0,2.0\n1.0,0.0\n")
    with pytest.raises(ValueError):
        RadialPotential.from_csv(path)


def test_rejects_negative_values():
    with pytest.raises(ValueError):
        RadialPotential(grid=np.array([0.0, 1.0]), values=np.array([-1.0]))


def test_rejects_grid_not_starting_at_zero():
    with pytest.raises(ValueError):
        RadialPotential(grid=np.array([0.1, 1.0]), values=np.array([1.0]))


@given(
    edges=st.lists(
        st.floats(min_value=0.01, max_value=2.0), min_size=1, max_size=6
    ),
    vals=st.lists(st.floats(min_value=0.0, max_value=9.0), min_size=1, max_size=6),
)
def test_cumulative_matches_brute_force(edges, vals):
    m = min(len(edges), len(vals))
    grid = np.concatenate(([0.0], np.cumsum(edges[:m])))
    values = np.asarray(vals[:m])
    if not np.any(values > 0.0):
        values = values + 1.0
    v = RadialPotential(grid=grid, values=values)
    for r in (0.0, float(grid[-1]) / 3.0, float(grid[-1]), float(grid[-1]) + 1.0):
        rr = np.linspace(0.0, r, 20001)
        brute = np.trapezoid(v(rr), rr)
        assert v.cumulative(r) == pytest.approx(brute, abs=2e-3 * (1 + v.v_max))
