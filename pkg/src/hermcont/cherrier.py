"""Laplacians of tr_χ ω and log tr_χ ω for metrics differing by a closed form.

Given Hermitian metrics χ and ω = g with d(ω - χ) = 0, the Chern Laplacian
of ω applied to tr_χ ω expands into curvature and torsion of χ, the Ricci
form of ω and a manifestly nonnegative quadratic term in

    Φ^r_{pj} = g^{r s̄} ∇_p g_{s̄ j} + T^r_{pj}      (∇, T of χ).

The functions here compute both sides independently so the residual measures
numerical error only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chern import _curvature, _gamma, _lower_curvature, closedness_defect
from .fields import HermitianField

CLOSED_TOL = 1e-6


@dataclass(frozen=True)
class CherrierTerms:
    lhs: np.ndarray            # Δ_ω tr_χ ω
    rhs: np.ndarray
    trace: np.ndarray          # tr_χ ω
    grad_trace: np.ndarray     # ∂_j tr_χ ω, [P, j]
    tau: np.ndarray            # τ_j of χ
    phi: np.ndarray            # Φ^r_{pj}, [P, r, p, j]
    g: np.ndarray
    chi: np.ndarray

    @property
    def residual(self) -> np.ndarray:
        return self.lhs - self.rhs


def _require_closed(chi, omega, engine, tol):
    defect = closedness_defect(omega, chi, engine)
    if defect > tol:
        raise ValueError(f"d(ω - χ) does not vanish (defect {defect:.3e} > {tol:g})")


def cherrier_terms(chi: HermitianField, omega: HermitianField, engine,
                   *, closed_tol: float = CLOSED_TOL) -> CherrierTerms:
    _require_closed(chi, omega, engine, closed_tol)
    cs, gs = engine.source(chi), engine.source(omega)

    gam_c = _gamma(cs, engine)
    gam_g = _gamma(gs, engine)
    curv_c = _curvature(gam_c, engine)
    curv_g = _curvature(gam_g, engine)

    def tr(c, g):
        return np.einsum("Ppq,Pqp->P", np.linalg.inv(c), g).real

    trace_f = engine.map(tr, cs, gs)
    d1 = engine.gradient(trace_f)
    d2 = engine.gradient(engine.map(lambda a: a[:, 1], d1))   # [P, 2, j, k]: ∂_j ∂_{k̄}

    c = engine.evaluate(cs)
    g = engine.evaluate(gs)
    Gc = engine.evaluate(gam_c)
    Gg = engine.evaluate(gam_g)
    Rc = engine.evaluate(curv_c)              # R_{k̄j}^p_r of χ
    Rlow_c = engine.evaluate(_lower_curvature(cs, curv_c, engine))
    Rg = engine.evaluate(curv_g)
    trace_v = engine.evaluate(trace_f)
    dtr = engine.evaluate(d1)[:, 0]
    ddtr = engine.evaluate(d2)[:, 0]

    ci, gi = np.linalg.inv(c), np.linalg.inv(g)
    T = Gc - np.swapaxes(Gc, 2, 3)                        # T^r_{pj} of χ
    tau = np.einsum("Pppj->Pj", T)
    ric_g = np.einsum("Pkjpp->Pkj", Rg)
    ric1_c = np.einsum("Pkjpp->Pkj", Rc)
    ric2_c = np.einsum("Ppq,Pqpkj->Pkj", ci, Rlow_c)

    # ∇_p g_{s̄j} = ∂_p g_{s̄j} - Γ^r_{pj}(χ) g_{s̄r};  g^{r s̄}∂_p g_{s̄ j} = Γ(ω)^r_{pj}
    phi = Gg - Gc + T

    lhs = np.einsum("Pjk,Pjk->P", gi, ddtr).real
    t1 = -np.einsum("Ppq,Pqp->P", ci, ric_g)
    t2 = np.einsum("Pjk,Pkjpr,Prq,Pqp->P", gi, Rc, ci, g)
    t3 = np.einsum("Pjk,Pkj->P", gi, ric2_c)
    t4 = -np.einsum("Pjk,Pkj->P", gi, ric1_c)
    t5 = -np.einsum("Pjk,Ppq,Psr,Prpj,Psqk->P", gi, ci, c, T, np.conj(T))
    t6 = phi_norm(g, c, phi)
    rhs = (t1 + t2 + t3 + t4 + t5).real + t6
    return CherrierTerms(lhs=lhs, rhs=rhs, trace=trace_v, grad_trace=dtr, tau=tau,
                         phi=phi, g=g, chi=c)


def phi_norm(g: np.ndarray, chi: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """g^{j k̄} χ^{p q̄} g_{s̄ r} Φ^r_{pj} conj(Φ^s_{qk})."""
    gi, ci = np.linalg.inv(g), np.linalg.inv(chi)
    return np.einsum("Pjk,Ppq,Psr,Prpj,Psqk->P", gi, ci, g, phi, np.conj(phi)).real


def aubin_yau_gap(g: np.ndarray, chi: np.ndarray, phi: np.ndarray,
                  psi: np.ndarray | None = None) -> np.ndarray:
    """Φ-norm minus |Ψ|²_g / tr_χ ω; nonnegative pointwise.

    Without ``psi`` the torsion-corrected gradient is rebuilt from Φ through
    Ψ_j = χ^{p q̄} g_{q̄ r} Φ^r_{pj}, which is what ∂_j tr_χ ω + τ_j equals when
    d(ω - χ) = 0.
    """
    g, chi, phi = np.asarray(g), np.asarray(chi), np.asarray(phi)
    if g.ndim == 2:
        g, chi, phi = g[None], chi[None], phi[None]
        psi = None if psi is None else np.asarray(psi)[None]
    ci, gi = np.linalg.inv(chi), np.linalg.inv(g)
    if psi is None:
        psi = np.einsum("Ppq,Pqr,Prpj->Pj", ci, g, phi)
    tr = np.einsum("Ppq,Pqp->P", ci, g).real
    psi_sq = np.einsum("Pjk,Pj,Pk->P", gi, psi, np.conj(psi)).real
    return phi_norm(g, chi, phi) - psi_sq / tr


def cherrier_trace_laplacian_check(chi: HermitianField, omega: HermitianField, engine,
                                   **kw) -> np.ndarray:
    """Δ_ω tr_χ ω minus its curvature/torsion expansion, per sample."""
    return cherrier_terms(chi, omega, engine, **kw).residual


@dataclass(frozen=True)
class LogTraceCheck:
    residual: np.ndarray
    aubin_yau_gap: np.ndarray


def cherrier_log_trace_check(chi: HermitianField, omega: HermitianField, engine,
                             **kw) -> LogTraceCheck:
    """Residual of the Δ_ω log tr_χ ω expansion plus the pointwise nonnegative gap.

    The left side Δ_ω log tr_χ ω is differentiated directly; the right side
    uses Ψ_j = ∂_j tr_χ ω + τ_j with τ the torsion 1-form of χ.
    """
    terms = cherrier_terms(chi, omega, engine, **kw)
    if np.any(terms.trace <= 0):
        raise ValueError("tr_χ ω must be positive")
    cs, gs = engine.source(chi), engine.source(omega)
    logtr = engine.map(lambda c, g: np.log(np.einsum("Ppq,Pqp->P", np.linalg.inv(c), g).real),
                       cs, gs)
    d2 = engine.gradient(engine.map(lambda a: a[:, 1], engine.gradient(logtr)))
    gi = np.linalg.inv(terms.g)
    lhs = np.einsum("Pjk,Pjk->P", gi, engine.evaluate(d2)[:, 0]).real

    u = terms.trace
    dtr, tau = terms.grad_trace, terms.tau
    psi = dtr + tau
    base = terms.rhs - phi_norm(terms.g, terms.chi, terms.phi)   # first five terms
    cross = 2 * np.einsum("Pjk,Pj,Pk->P", gi, dtr / u[:, None], np.conj(tau)).real
    tt = np.einsum("Pjk,Pj,Pk->P", gi, tau, np.conj(tau)).real / u
    gap = aubin_yau_gap(terms.g, terms.chi, terms.phi, psi)
    rhs = (base + cross + tt + gap) / u
    return LogTraceCheck(residual=lhs - rhs, aubin_yau_gap=gap)
