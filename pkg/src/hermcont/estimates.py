"""Estimate functionals along continuity solutions and the explicit OT family.

Every quantity is computed per sample and reduced with a fixed order, so the
numbers written to CSV do not depend on how rows are scheduled.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import astuple, dataclass
from typing import Sequence

import numpy as np

from . import model
from .chern import _torsion_lowered, calabi_quantity, chern_curvature
from .fields import HermitianField, PointSet

CSV_HEADER = ("t", "sup_abs_phi_scaled", "det_log_ratio_scaled", "trace_gap_fwd",
              "trace_gap_bwd", "equivalence_eps", "calabi_sup", "scalar_R_sup",
              "ricci_min", "ricci_max", "gh_proxy")


@dataclass(frozen=True)
class DiagnosticsRow:
    t: float
    sup_abs_phi_scaled: float
    det_log_ratio_scaled: float
    trace_gap_fwd: float
    trace_gap_bwd: float
    equivalence_eps: float
    calabi_sup: float
    scalar_R_sup: float
    ricci_min: float
    ricci_max: float
    gh_proxy: float

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in astuple(self))


def format_float(v: float) -> str:
    return format(float(v), ".17g")


def rows_to_csv(rows: Sequence[DiagnosticsRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in sorted(rows, key=lambda r: r.t):
        w.writerow([format_float(v) for v in astuple(r)])
    return buf.getvalue()


def rows_from_csv(text: str) -> list:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != CSV_HEADER:
        raise ValueError("unexpected diagnostics header")
    return [DiagnosticsRow(*map(float, row)) for row in reader]


# -- matrix functionals -----------------------------------------------------------

def _arr(m):
    m = m.values if isinstance(m, HermitianField) else np.asarray(m)
    return m[None] if m.ndim == 2 else m


def generalized_eigenvalues(form, reference) -> np.ndarray:
    """Eigenvalues of ``form`` relative to the positive ``reference``, ascending, ``[P, n]``.

    Whitening by the Cholesky factor L of the reference: eig(L⁻¹ A L⁻ᴴ).
    """
    A, B = _arr(form), _arr(reference)
    L = np.linalg.cholesky(B)
    Li = np.linalg.inv(L)
    W = Li @ A @ np.conj(np.swapaxes(Li, -1, -2))
    W = 0.5 * (W + np.conj(np.swapaxes(W, -1, -2)))
    return np.linalg.eigvalsh(W)


def _trace(ref, form):
    return np.einsum("Pjk,Pkj->P", np.linalg.inv(ref), form).real


def c0_and_determinant(phi: np.ndarray, t: float, omega, omega_hat) -> tuple:
    """(sup|φ|·(t+1), t·sup|log ωⁿ/ω̂ⁿ|)."""
    w, wh = _arr(omega), _arr(omega_hat)
    ratio = np.real(np.linalg.det(w)) / np.real(np.linalg.det(wh))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    return float(np.max(np.abs(phi))) * (t + 1), t * float(np.max(np.abs(np.log(ratio))))


@dataclass(frozen=True)
class C0Check:
    phi_scaled: float
    det_scaled: float
    phi_bound: float
    det_bound: float
    applicable: bool

    @property
    def holds(self) -> bool:
        return (not self.applicable) or (self.phi_scaled <= self.phi_bound
                                         and self.det_scaled <= self.det_bound)


def c0_check(phi, t, omega, omega_hat, phi0_norm: float, f_norm: float = 0.0,
             slack: float = 1e-6) -> C0Check:
    """Compare against ‖φ₀‖ + ‖f‖ and 2‖φ₀‖ + ‖f‖; only asserted for t ≥ 1."""
    a, b = c0_and_determinant(phi, t, omega, omega_hat)
    return C0Check(a, b, phi0_norm + f_norm + slack, 2 * phi0_norm + f_norm + slack, t >= 1)


def trace_gaps_and_equivalence(omega, omega_hat) -> tuple:
    """(sup(tr_ω̂ ω - n), sup(tr_ω ω̂ - n), ε) with ε the smallest (1±ε)ω̂ bracket."""
    w, wh = _arr(omega), _arr(omega_hat)
    n = w.shape[-1]
    fwd = float(np.max(_trace(wh, w))) - n
    bwd = float(np.max(_trace(w, wh))) - n
    lam = generalized_eigenvalues(w, wh)
    eps = float(np.max(np.maximum(lam[:, -1] - 1, 1 - lam[:, 0])))
    return fwd, bwd, max(eps, 0.0)


def log_slope(t: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log t."""
    t, y = np.asarray(t, float), np.asarray(y, float)
    return float(np.polyfit(np.log(t), np.log(y), 1)[0])


@dataclass(frozen=True)
class MaclaurinResiduals:
    inverse: np.ndarray   # RHS - LHS of tr_ω ω̂ ≤ n^{2-n} (tr_ω̂ ω)^{n-1} / (ωⁿ/ω̂ⁿ)
    direct: np.ndarray    # RHS - LHS of tr_ω̂ ω ≤ n^{2-n} (tr_ω ω̂)^{n-1} / (ω̂ⁿ/ωⁿ)

    @property
    def min(self) -> float:
        return float(min(self.inverse.min(), self.direct.min()))


def maclaurin_checks(omega, omega_hat) -> MaclaurinResiduals:
    """Both trace/determinant inequalities implied by Maclaurin's inequality.

    The direct form with ω̂ = ω₀ is the trace flip used in the blow-up argument.
    """
    w, wh = _arr(omega), _arr(omega_hat)
    n = w.shape[-1]
    fwd, bwd = _trace(wh, w), _trace(w, wh)
    ratio = np.real(np.linalg.det(w)) / np.real(np.linalg.det(wh))
    c = float(n) ** (2 - n)
    inv = c * fwd ** (n - 1) / ratio - bwd
    direct = c * bwd ** (n - 1) * ratio - fwd
    return MaclaurinResiduals(inverse=inv, direct=direct)


def ricci_bounds(ricci, omega) -> tuple:
    """(min, max) generalized eigenvalues of Ric ω relative to ω."""
    lam = generalized_eigenvalues(ricci, omega)
    return float(lam.min()), float(lam.max())


def ricci_lower_bound_holds(rmin: float, t: float, tol: float = 1e-8) -> bool:
    return rmin >= -(1 + 1 / t) - tol


# -- state-level quantities -------------------------------------------------------

def _curvature_data(state, problem):
    be = problem.backend
    if hasattr(be, "engine"):
        return chern_curvature(state.omega, be.engine)
    return None


def contracted_scalar_identity(state, problem, R=None) -> float:
    """sup |tr_ω ω₀ - n - tR| (unnormalized) or sup |tr_ω ω₀ - (t+1)n - tR| (normalized)."""
    be, t = problem.backend, state.t
    om = state.omega.values
    if R is None:
        R = be.scalar_curvature(om)
    n = be.n
    lead = (t + 1) * n if problem.variant == "normalized" else n
    tr = _trace(om, be.omega0)
    return float(np.max(np.abs(tr - lead - t * R)))


def calabi_chi(state, problem) -> np.ndarray:
    """Metric whose Calabi quantity is tracked; (t+1)ω for the normalized variant."""
    scale = state.t + 1 if problem.variant == "normalized" else 1.0
    return scale * state.omega.values


def calabi_sup(state, problem) -> float:
    be = problem.backend
    chi = calabi_chi(state, problem)
    if hasattr(be, "engine"):
        S = calabi_quantity(be.field(chi), be.field(be.reference), be.engine)
        return float(np.max(S))
    return float(np.max(sphere_calabi(be, chi[:, 0, 0].real)))


def sphere_calabi(backend, density: np.ndarray) -> np.ndarray:
    """S for n = 1 rotationally symmetric χ against ω₀: ½(1 - x²)(∂ₓ log(χ/ω₀))² / χ."""
    f = np.log(density / backend.rho)
    df = np.gradient(f, backend.x)
    return 0.5 * (1 - backend.x ** 2) * df ** 2 / density


def gh_proxy_grid(omega, reference) -> float:
    """sqrt of the largest eigenvalue of ω relative to the reference."""
    return float(np.sqrt(np.max(generalized_eigenvalues(omega, reference)[:, -1])))


def diagnostics_row(state, problem) -> DiagnosticsRow:
    be, t = problem.backend, state.t
    om = state.omega.values
    ref = be.comparison_metric(t, problem.variant)
    a, b = c0_and_determinant(state.phi, t, om, ref)
    fwd, bwd, eps = trace_gaps_and_equivalence(om, ref)
    cd = _curvature_data(state, problem)
    if cd is not None:
        R, ric = cd.scalar, cd.ricci_first
    else:
        R = be.scalar_curvature(om)
        ric = R[:, None, None] * om
    rmin, rmax = ricci_bounds(ric, om)
    return DiagnosticsRow(
        t=t, sup_abs_phi_scaled=a, det_log_ratio_scaled=b, trace_gap_fwd=fwd,
        trace_gap_bwd=bwd, equivalence_eps=eps, calabi_sup=calabi_sup(state, problem),
        scalar_R_sup=float(np.max(R)), ricci_min=rmin, ricci_max=rmax,
        gh_proxy=gh_proxy_grid(om, be.reference if hasattr(be, "engine") else be.omega0),
    )


# -- blow-up ----------------------------------------------------------------------

@dataclass(frozen=True)
class BlowupFit:
    t: np.ndarray
    sup_R: np.ndarray
    a: float
    T_fit: float
    sufficient: bool


def blowup_profile(times: Sequence[float], sup_R: Sequence[float], window: float = 0.1,
                   min_points: int = 3) -> BlowupFit:
    """Fit sup R ≈ a/(T - t) by least squares on 1/sup R over the last ``window`` of t."""
    t = np.asarray(times, float)
    R = np.asarray(sup_R, float)
    order = np.argsort(t)
    t, R = t[order], R[order]
    sel = t >= t[-1] * (1 - window) if t.size else np.zeros(0, bool)
    if sel.sum() < min_points or np.any(R[sel] <= 0):
        return BlowupFit(t, R, math.nan, math.nan, False)
    slope, icept = np.polyfit(t[sel], 1.0 / R[sel], 1)
    if slope >= 0:
        return BlowupFit(t, R, math.nan, math.nan, False)
    return BlowupFit(t, R, float(-1 / slope), float(-icept / slope), True)


# -- explicit OT family -----------------------------------------------------------

@dataclass(frozen=True)
class GHProxy:
    fiber: float
    base_deviation: float

    @property
    def total(self) -> float:
        return self.fiber + self.base_deviation


def gh_collapse_proxy(t: float, points, family: model.ReferenceFamily | None = None) -> GHProxy:
    """Fiber length sqrt(sup ĝ_{w̄w}(t)) plus sup |ω̂(t)_base - α|."""
    Z = model._as_points(points)
    fam = family or model.ReferenceFamily(model.omega_ot, 1.0, Z.shape[1])
    hat = fam.hat_omega(t)(Z)
    fiber = math.sqrt(float(np.max(hat[:, -1, -1].real)))
    base = float(np.max(np.abs(hat[:, :-1, :-1] - model.alpha(Z)[:, :-1, :-1])))
    return GHProxy(fiber, base)


def gh_base_constant(t: float, points, family: model.ReferenceFamily | None = None) -> float:
    """Least-squares c with ω̂(t)_base ≈ c·α on the base block, a stand-in for the limit normalization."""
    Z = model._as_points(points)
    fam = family or model.ReferenceFamily(model.omega_ot, 1.0, Z.shape[1])
    base = fam.hat_omega(t)(Z)[:, :-1, :-1]
    a = model.alpha(Z)[:, :-1, :-1]
    return float(np.sum((np.conj(a) * base).real) / np.sum(np.abs(a) ** 2))


def explicit_ricci_bounds(t: float, points, family=None) -> tuple:
    """Generalized eigenvalues of Ric ω̂ = -α against ω̂(t)."""
    Z = model._as_points(points)
    fam = family or model.ReferenceFamily(model.omega_ot, 1.0, Z.shape[1])
    return ricci_bounds(-model.alpha(Z), fam.hat_omega(t)(Z))


def _euclid(Z):
    Z = np.asarray(Z)
    return np.broadcast_to(np.eye(Z.shape[1], dtype=complex), (Z.shape[0], Z.shape[1], Z.shape[1])).copy()


def stretched_calabi_sup(t: float, points, engine=None) -> float:
    """sup S for λ_t*ω̂(t) = α + β + γ/(t+1) against the Euclidean metric."""
    pts = points if isinstance(points, PointSet) else PointSet(model._as_points(points))
    eng = engine or model.model_engine(pts)
    chi = HermitianField.from_function(model.stretched_reference(t), pts)
    ref = HermitianField.from_function(_euclid, pts)
    return float(np.max(calabi_quantity(chi, ref, eng)))


def torsion_derivative_norms(g: HermitianField, engine) -> tuple:
    """Coordinate sup-norms of T_{ijk̄} and of its first ∂ and ∂̄ derivatives.

    Recorded next to the Calabi supremum; nothing is asserted about them.
    """
    T = _torsion_lowered(engine.source(g), engine)
    return (float(np.max(np.abs(engine.evaluate(T)))),
            float(np.max(np.abs(engine.evaluate(engine.gradient(T))))))


def explicit_family_row(t: float, points, family=None, engine=None) -> DiagnosticsRow:
    """Diagnostics of the normalized explicit solution ω(t) = ω̂(t) with its normalized potential."""
    Z = model._as_points(points)
    fam = family or model.ReferenceFamily(model.omega_ot, 1.0, Z.shape[1])
    hat = fam.hat_omega(t)(Z)
    phi = fam.potential(t, Z)
    a, b = c0_and_determinant(phi, t, hat, hat)
    fwd, bwd, eps = trace_gaps_and_equivalence(hat, hat)
    rmin, rmax = explicit_ricci_bounds(t, Z, fam)
    # Ric ω̂ = -α, so R = -tr_ω̂ α
    R = -_trace(hat, model.alpha(Z))
    return DiagnosticsRow(
        t=t, sup_abs_phi_scaled=a, det_log_ratio_scaled=b, trace_gap_fwd=fwd,
        trace_gap_bwd=bwd, equivalence_eps=eps,
        calabi_sup=stretched_calabi_sup(t, Z, engine), scalar_R_sup=float(np.max(R)),
        ricci_min=rmin, ricci_max=rmax, gh_proxy=gh_collapse_proxy(t, Z, fam).total,
    )
