import numpy as np
import pytest
from hypothesis import given

from hermcont.cherrier import (aubin_yau_gap, cherrier_log_trace_check, cherrier_terms,
                               cherrier_trace_laplacian_check, phi_norm)
from hermcont.differentiation import CentralDifference
from hermcont.fields import HermitianField, PointSet
from hermcont.identities import RandomMetrics, RandomPotentials
from tests.strategies import pd_matrices, seeds


def _random_pair(n=2, count=3, seed=7):
    rng = np.random.default_rng(seed)
    chi = RandomMetrics.draw(n, count, rng)
    psi = RandomPotentials.draw(n, count, rng)
    pts = PointSet(chi.centers() + 0.4 * (rng.uniform(-1, 1, (count, n)) + 1j * rng.uniform(-1, 1, (count, n))))
    eng = CentralDifference(pts, order=6, step=1e-2)
    return (HermitianField.from_function(chi, pts),
            HermitianField.from_function(lambda Z: chi(Z) + psi.ddbar(Z), pts), eng)


def test_trace_laplacian_expansion_non_kahler():
    chi, om, eng = _random_pair()
    assert np.max(np.abs(cherrier_trace_laplacian_check(chi, om, eng))) < 1e-5


def test_log_trace_expansion_and_gap():
    chi, om, eng = _random_pair(seed=11)
    chk = cherrier_log_trace_check(chi, om, eng)
    assert np.max(np.abs(chk.residual)) < 1e-5
    assert np.all(chk.aubin_yau_gap >= -1e-10)


def test_gradient_rebuilt_from_phi_matches_trace_gradient():
    # ∂_j tr_χ ω + τ_j = χ^{pq̄} g_{q̄r} Φ^r_{pj} whenever d(ω - χ) = 0
    chi, om, eng = _random_pair(seed=3)
    t = cherrier_terms(chi, om, eng)
    rebuilt = np.einsum("Ppq,Pqr,Prpj->Pj", np.linalg.inv(t.chi), t.g, t.phi)
    assert np.allclose(rebuilt, t.grad_trace + t.tau, atol=1e-8)


def test_kahler_reference_has_no_torsion_terms():
    pts = PointSet(np.array([[0.1 + 0.2j, 0.3 - 0.1j], [-0.4 + 0.2j, 0.2 + 0.5j]]))
    eng = CentralDifference(pts, order=6, step=1e-2)
    flat = HermitianField.from_function(lambda Z: np.broadcast_to(np.eye(2), (len(Z), 2, 2)).copy(), pts)
    psi = RandomPotentials.draw(2, 1, np.random.default_rng(0), cells=False)
    om = HermitianField.from_function(lambda Z: np.eye(2) + psi.ddbar(Z), pts)
    t = cherrier_terms(flat, om, eng)
    assert np.max(np.abs(t.tau)) < 1e-12
    assert np.max(np.abs(t.residual)) < 1e-6


def test_rejects_non_closed_difference():
    chi, om, eng = _random_pair()
    with pytest.raises(ValueError):
        cherrier_terms(chi, om.scaled(2.0), eng)


@given(pd_matrices(count=6), pd_matrices(count=6), seeds)
def test_aubin_yau_gap_is_nonnegative(g, chi, seed):
    if g.shape[-1] != chi.shape[-1]:
        chi = np.broadcast_to(np.eye(g.shape[-1]), g.shape).astype(complex)
    n = g.shape[-1]
    rng = np.random.default_rng(seed)
    phi = rng.normal(size=(6, n, n, n)) + 1j * rng.normal(size=(6, n, n, n))
    gap = aubin_yau_gap(g, chi, phi)
    assert np.all(gap >= -1e-9 * phi_norm(g, chi, phi))
