import json
import logging

import numpy as np
import pytest
from hypothesis import given

from hermcont.fields import (HermitianField, NotPositiveDefinite, PointSet, SphereCells,
                             from_snapshot, invert, snapshot, symmetrize, torus_grid)
from tests.strategies import pd_matrices


def test_not_positive_reports_first_bad_sample():
    vals = np.array([np.eye(2), np.diag([1.0, -0.5]), np.diag([0.0, 1.0])], dtype=complex)
    with pytest.raises(NotPositiveDefinite) as err:
        HermitianField(vals, PointSet(np.zeros((3, 2))))
    assert err.value.index == 1
    assert err.value.eigenvalue == pytest.approx(-0.5)


def test_symmetrize_warns_only_above_threshold(caplog):
    a = np.eye(2, dtype=complex)[None].copy()
    a[0, 0, 1] = 1e-12
    with caplog.at_level(logging.WARNING):
        symmetrize(a)
    assert not caplog.records
    a[0, 0, 1] = 1e-3
    with caplog.at_level(logging.WARNING):
        out = symmetrize(a)
    assert caplog.records
    assert np.allclose(out, np.conj(np.swapaxes(out, -1, -2)))


def test_field_values_are_read_only():
    g = HermitianField(np.eye(2), PointSet(np.zeros((1, 2))))
    with pytest.raises(ValueError):
        g.values[0, 0, 0] = 2.0


def test_value_count_must_match_domain():
    with pytest.raises(ValueError):
        HermitianField(np.stack([np.eye(2)] * 2), PointSet(np.zeros((3, 2))))


@given(pd_matrices(count=4))
def test_inverse_times_metric_is_identity(vals):
    g = HermitianField(vals, PointSet(np.zeros((4, vals.shape[-1]))))
    prod = np.einsum("Pjk,Pkl->Pjl", invert(g), g.values)
    assert np.allclose(prod, np.eye(vals.shape[-1]), atol=1e-8 * np.linalg.cond(vals).max())


@given(pd_matrices(count=3))
def test_snapshot_round_trip(vals):
    n = vals.shape[-1]
    pts = PointSet(np.arange(3 * n).reshape(3, n) * (1 + 0.5j))
    g = HermitianField(vals, pts)
    back = from_snapshot(json.loads(json.dumps(snapshot(g))))
    assert np.array_equal(back.values, g.values)
    assert np.allclose(back.domain.points, pts.points)


def test_grid_snapshots_keep_domain():
    grid = torus_grid(2, 4)
    g = HermitianField(np.broadcast_to(np.eye(2), (16, 2, 2)), grid)
    assert from_snapshot(snapshot(g, t=1.0)).domain == grid
    cells = SphereCells(8)
    s = HermitianField(np.ones((8, 1, 1)), cells)
    assert from_snapshot(snapshot(s)).domain == cells


def test_sphere_cells_cover_interval():
    c = SphereCells(10)
    assert c.faces()[0] == -1 and c.faces()[-1] == pytest.approx(1)
    assert np.allclose(np.diff(c.centers()), c.dx)


def test_torus_grid_points_have_zero_imaginary_part():
    g = torus_grid(2, 8)
    assert g.size == 64
    assert np.all(g.points().imag == 0)
    assert g.cell_volume() == pytest.approx((2 * np.pi / 8) ** 2)
