import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hermcont.chern import (calabi_quantity, chern_curvature, closedness_defect,
                            commutation_residuals, residual_norms, torsion_transfer_check, trace)
from hermcont.differentiation import CentralDifference, SpectralDifference
from hermcont.fields import HermitianField, PointSet, torus_grid
from hermcont.identities import RandomMetrics

PTS2 = PointSet(np.array([[0.3 + 0.2j, -0.4 + 0.1j], [0.1 - 0.5j, 0.6 + 0.3j],
                          [-0.2 + 0.7j, 0.05 - 0.2j]]))


def _engine(pts, step=1e-2):
    return CentralDifference(pts, order=6, step=step)


def _conformal(weights):
    # g = exp(Σ w_j |z_j|²) I
    w = np.asarray(weights, float)

    def g(Z):
        u = np.sum(w * abs(Z) ** 2, axis=1)
        return np.exp(u)[:, None, None] * np.eye(Z.shape[1])

    return g


def test_curvature_of_conformal_curve():
    # n = 1, g = e^{|z|²}: R_{z̄z} = -1, scalar = -e^{-|z|²}
    pts = PointSet(np.array([[0.2 + 0.1j], [-0.5 + 0.4j]]))
    cd = chern_curvature(HermitianField.from_function(_conformal([1.0]), pts), _engine(pts))
    assert np.allclose(cd.ricci_first[:, 0, 0], -1, atol=1e-9)
    assert np.allclose(cd.scalar, -np.exp(-abs(pts.points[:, 0]) ** 2), atol=1e-9)


def test_conformal_ricci_forms():
    # g = e^u I with u = |z1|² + 2|z2|²: first Ricci = -n ∂∂̄u, second Ricci = -(Δu) I
    cd = chern_curvature(HermitianField.from_function(_conformal([1.0, 2.0]), PTS2), _engine(PTS2))
    assert np.allclose(cd.ricci_first, -2 * np.diag([1.0, 2.0]), atol=1e-8)
    assert np.allclose(cd.ricci_second, -3 * np.eye(2), atol=1e-8)


def test_torsion_of_non_kahler_diagonal_metric():
    # g = diag(1 + |z2|², 1): T_{2 1 1̄} = z̄2, τ_2 = -z̄2/(1 + |z2|²), τ_1 = 0
    def g(Z):
        out = np.zeros((len(Z), 2, 2), dtype=complex)
        out[:, 0, 0] = 1 + abs(Z[:, 1]) ** 2
        out[:, 1, 1] = 1
        return out

    cd = chern_curvature(HermitianField.from_function(g, PTS2), _engine(PTS2))
    z2 = PTS2.points[:, 1]
    assert np.allclose(cd.torsion_lowered[:, 1, 0, 0], np.conj(z2), atol=1e-9)
    assert np.allclose(cd.torsion_lowered[:, 0, 1, 0], -np.conj(z2), atol=1e-9)
    assert np.allclose(cd.tau[:, 1], -np.conj(z2) / (1 + abs(z2) ** 2), atol=1e-9)
    assert np.allclose(cd.tau[:, 0], 0, atol=1e-9)


def test_kahler_metric_is_torsion_free():
    def g(Z):
        # I + i∂∂̄(|z1|⁴/4 + |z1 z2|²/2)
        z1, z2 = Z[:, 0], Z[:, 1]
        out = np.zeros((len(Z), 2, 2), dtype=complex)
        out[:, 0, 0] = 1 + abs(z1) ** 2 + 0.5 * abs(z2) ** 2
        out[:, 1, 1] = 1 + 0.5 * abs(z1) ** 2
        out[:, 0, 1] = 0.5 * z1 * np.conj(z2)      # [k̄, j] = ∂_j ∂_{k̄} ψ
        out[:, 1, 0] = 0.5 * np.conj(z1) * z2
        return out

    cd = chern_curvature(HermitianField.from_function(g, PTS2), _engine(PTS2))
    assert np.max(np.abs(cd.torsion_lowered)) < 1e-9


def test_commutation_identities_on_random_metrics():
    rng = np.random.default_rng(5)
    metrics = RandomMetrics.draw(2, 4, rng)
    pts = PointSet(metrics.centers() + 0.3 * (rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))))
    norms = residual_norms(commutation_residuals(HermitianField.from_function(metrics, pts),
                                                 _engine(pts)))
    assert set(norms) == {"1", "2", "3", "4", "5"}
    assert max(norms.values()) < 1e-5


@settings(max_examples=10)
@given(st.floats(0.2, 5.0), st.integers(0, 1000))
def test_constant_rescaling(c, seed):
    rng = np.random.default_rng(seed)
    metrics = RandomMetrics.draw(2, 2, rng)
    pts = PointSet(metrics.centers() + 0.2 * rng.normal(size=(2, 2)))
    eng = _engine(pts)
    g = HermitianField.from_function(metrics, pts)
    a, b = chern_curvature(g, eng), chern_curvature(g.scaled(c), eng)
    assert np.allclose(a.gamma, b.gamma, atol=1e-8)
    assert np.allclose(a.ricci_first, b.ricci_first, atol=1e-7)
    assert np.allclose(b.scalar, a.scalar / c, atol=1e-7)


def test_spectral_and_finite_difference_agree_on_torus():
    grid = torus_grid(2, 32)

    def g_fn(Z):
        x1, x2 = Z[:, 0].real, Z[:, 1].real
        out = np.zeros((len(Z), 2, 2), dtype=complex)
        # I + ¼ Hess(0.3 cos x1 + 0.2 sin(x1 + x2)), a Kähler metric
        h11 = -0.3 * np.cos(x1) - 0.2 * np.sin(x1 + x2)
        h22 = -0.2 * np.sin(x1 + x2)
        out[:, 0, 0] = 1 + 0.25 * h11
        out[:, 1, 1] = 1 + 0.25 * h22
        out[:, 0, 1] = out[:, 1, 0] = 0.25 * h22
        return out

    spectral = chern_curvature(HermitianField(g_fn(grid.points()), grid), SpectralDifference(grid))
    sel = [0, 37, 300, 777]
    pts = PointSet(grid.points()[sel])
    fd = chern_curvature(HermitianField.from_function(g_fn, pts), _engine(pts, 0.05))
    assert np.allclose(spectral.scalar[sel], fd.scalar, atol=1e-7)


def test_trace_of_metric_with_itself():
    vals = np.stack([np.diag([1.0, 2.0]), np.eye(2)]).astype(complex)
    assert np.allclose(trace(vals, vals), 2)
    assert np.allclose(trace(np.eye(2), np.diag([1.0, 3.0])), 4)
    with pytest.raises(ValueError):
        trace(np.eye(2), np.eye(3))


def test_calabi_vanishes_for_scaled_reference():
    pts = PTS2
    chi = HermitianField.from_function(_conformal([1.0, 0.5]), pts)
    eng = _engine(pts)
    assert np.max(np.abs(calabi_quantity(chi, chi, eng))) < 1e-12
    assert np.max(np.abs(calabi_quantity(chi.scaled(3.0), chi, eng))) < 1e-12


def test_calabi_of_conformal_metric_against_flat():
    # χ = e^{|z1|²} I, χ̂ = I: S = n e^{-u} |∂u|² = 2 e^{-|z1|²} |z1|²
    pts = PTS2
    eng = _engine(pts)
    chi = HermitianField.from_function(_conformal([1.0, 0.0]), pts)
    flat = HermitianField.from_function(_conformal([0.0, 0.0]), pts)
    z1 = pts.points[:, 0]
    expected = 2 * np.exp(-abs(z1) ** 2) * abs(z1) ** 2
    assert np.allclose(calabi_quantity(chi, flat, eng), expected, atol=1e-9)


def test_torsion_transfer_for_closed_difference():
    pts = PTS2
    eng = _engine(pts)
    om0 = HermitianField.from_function(_conformal([0.5, 0.0]), pts)

    def om(Z):
        # ω₀ + i∂∂̄|z2|⁴/4
        out = _conformal([0.5, 0.0])(Z)
        out[:, 1, 1] += abs(Z[:, 1]) ** 2
        return out

    omega = HermitianField.from_function(om, pts)
    assert closedness_defect(omega, om0, eng) < 1e-9
    assert torsion_transfer_check(omega, om0, eng) < 1e-9
    with pytest.raises(ValueError):
        torsion_transfer_check(om0.scaled(2.0), om0, eng)
