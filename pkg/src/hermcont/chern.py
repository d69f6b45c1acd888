"""Chern connection, torsion and curvature of Hermitian metrics.

Index storage (sample axis ``P`` first, barred indices marked ``b``):

====================  ===================================  ======================
array                 meaning                              axes
====================  ===================================  ======================
``g``                 g_{k̄ j}                              ``[P, kb, j]``
``ginv``              g^{j k̄}                              ``[P, j, kb]``
``gamma``             Γ^p_{j r}                            ``[P, p, j, r]``
``torsion``           T^p_{j r}                            ``[P, p, j, r]``
``torsion_lowered``   T_{i j k̄} = g_{k̄ r} T^r_{i j}        ``[P, i, j, kb]``
``tau``               τ_j = T^p_{p j}                      ``[P, j]``
``curvature``         R_{k̄ j}{}^p{}_r                      ``[P, kb, j, p, r]``
``curvature_lowered`` R_{k̄ j l̄ r} = g_{l̄ p} R_{k̄ j}^p_r    ``[P, kb, j, lb, r]``
``ricci_first``       R_{k̄ j} = R_{k̄ j}{}^p{}_p            ``[P, kb, j]``
``ricci_second``      R'_{k̄ j} = g^{p q̄} R_{q̄ p k̄ j}       ``[P, kb, j]``
``scalar``            R = g^{j k̄} R_{k̄ j}                  ``[P]``
====================  ===================================  ======================

Barred tensors such as T_{j̄ l̄ k} are complex conjugates of the unbarred ones
and are formed on the fly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .fields import HermitianField, inverse_values


@dataclass(frozen=True)
class ChernData:
    g: np.ndarray
    ginv: np.ndarray
    gamma: np.ndarray
    torsion: Optional[np.ndarray] = None
    torsion_lowered: Optional[np.ndarray] = None
    tau: Optional[np.ndarray] = None
    curvature: Optional[np.ndarray] = None
    curvature_lowered: Optional[np.ndarray] = None
    ricci_first: Optional[np.ndarray] = None
    ricci_second: Optional[np.ndarray] = None
    scalar: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.g.shape[-1]


# -- lazy building blocks -------------------------------------------------------
# Each takes engine-native fields (arrays on grids, closures on point sets)
# and returns engine-native fields, so derivatives can be stacked.

def _inv(g):
    return np.linalg.inv(g)


def _gamma(g, engine):
    dg = engine.gradient(g)
    return engine.map(
        lambda gg, d: np.einsum("Ppq,Pjqr->Ppjr", _inv(gg), d[:, 0]), g, dg
    )


def _curvature(gamma, engine):
    # R_{k̄j}^p_r = -∂_{k̄} Γ^p_{jr}; gradient gives [P, 1, k, p, j, r]
    dgam = engine.gradient(gamma)
    return engine.map(lambda d: -np.transpose(d[:, 1], (0, 1, 3, 2, 4)), dgam)


def _lower_curvature(g, curv, engine):
    return engine.map(lambda gg, R: np.einsum("Plp,Pkjpr->Pkjlr", gg, R), g, curv)


def _torsion_lowered(g, engine):
    # T_{ij k̄} = ∂_i g_{k̄ j} - ∂_j g_{k̄ i}
    dg = engine.gradient(g)

    def f(d):
        a = np.einsum("Pikj->Pijk", d[:, 0])
        return a - np.swapaxes(a, 1, 2)

    return engine.map(f, dg)


def metric_source(g: HermitianField, engine):
    return engine.source(g)


# -- public operations ----------------------------------------------------------

def chern_connection(g: HermitianField, engine) -> ChernData:
    """Γ^p_{jr} = g^{p q̄} ∂_j g_{q̄ r} at the engine's sample points."""
    src = engine.source(g)
    gamma = engine.evaluate(_gamma(src, engine))
    return ChernData(g=g.values, ginv=inverse_values(g.values), gamma=gamma)


def torsion_and_tau(cd: ChernData) -> ChernData:
    """Fill torsion T^p_{jr} = Γ^p_{jr} - Γ^p_{rj}, its lowering, and τ_j = T^p_{pj}."""
    T = cd.gamma - np.swapaxes(cd.gamma, 2, 3)
    low = np.einsum("Pkr,Prij->Pijk", cd.g, T)
    tau = np.einsum("Pppj->Pj", T)
    return replace(cd, torsion=T, torsion_lowered=low, tau=tau)


def curvature_from_tensor(cd: ChernData, curv: np.ndarray) -> ChernData:
    lowered = np.einsum("Plp,Pkjpr->Pkjlr", cd.g, curv)
    ric1 = np.einsum("Pkjpp->Pkj", curv)
    ric2 = np.einsum("Ppq,Pqpkj->Pkj", cd.ginv, lowered)
    scalar = np.einsum("Pjk,Pkj->P", cd.ginv, ric1).real
    return replace(cd, curvature=curv, curvature_lowered=lowered,
                   ricci_first=ric1, ricci_second=ric2, scalar=scalar)


def chern_curvature(g: HermitianField, engine) -> ChernData:
    """Full Chern data: connection, torsion, curvature, both Ricci forms, scalar curvature."""
    src = engine.source(g)
    gamma = _gamma(src, engine)
    curv = engine.evaluate(_curvature(gamma, engine))
    cd = torsion_and_tau(ChernData(g=g.values, ginv=inverse_values(g.values),
                                   gamma=engine.evaluate(gamma)))
    return curvature_from_tensor(cd, curv)


def trace(reference: HermitianField | np.ndarray, form: HermitianField | np.ndarray) -> np.ndarray:
    """tr_ω α = g^{j k̄} α_{k̄ j}, real part, per sample."""
    ref = reference.values if isinstance(reference, HermitianField) else np.asarray(reference)
    frm = form.values if isinstance(form, HermitianField) else np.asarray(form)
    if ref.shape[-1] != frm.shape[-1]:
        raise ValueError(f"dimension mismatch: {ref.shape[-1]} vs {frm.shape[-1]}")
    if ref.ndim == 2:
        ref = ref[None]
    if frm.ndim == 2:
        frm = frm[None]
    return np.einsum("Pjk,Pkj->P", inverse_values(ref), frm).real


def commutation_residuals(g: HermitianField, engine) -> dict:
    """Residuals (LHS - RHS) of the five curvature/torsion commutation identities.

    Keys ``"1"`` ... ``"5"``; identity 3 holds two equalities and its residual
    stacks both along a leading axis. All covariant derivatives use the Chern
    connection of ``g``.
    """
    src = engine.source(g)
    gamma_f = _gamma(src, engine)
    curv_f = _curvature(gamma_f, engine)
    Rlow_f = _lower_curvature(src, curv_f, engine)
    Tlow_f = _torsion_lowered(src, engine)

    gv = engine.evaluate(src)
    Gam = engine.evaluate(gamma_f)
    R = engine.evaluate(Rlow_f)                      # R_{j̄ i l̄ k}: [P, j, i, l, k]
    Tl = engine.evaluate(Tlow_f)                     # T_{i k l̄}:   [P, i, k, l]
    dT = engine.evaluate(engine.gradient(Tlow_f))    # [P, 2, a, i, k, l]
    dR = engine.evaluate(engine.gradient(Rlow_f))    # [P, 2, a, j, i, l, k]
    T_up = np.einsum("Prl,Pikl->Prik", np.linalg.inv(gv), Tl)   # T^r_{ik}
    Gc = np.conj(Gam)

    # ∇_{j̄} T_{ik l̄} = ∂_{j̄} T_{ik l̄} - conj(Γ^s_{jl}) T_{ik s̄}      -> [P, j, i, k, l]
    nb_T = dT[:, 1] - np.einsum("Psjl,Piks->Pjikl", Gc, Tl)
    # T_{j̄ l̄ k} := conj(T_{j l k̄}); ∇_i T_{j̄ l̄ k} = ∂_i conj(T) - Γ^r_{ik} T_{j̄ l̄ r}
    Tb = np.conj(Tl)                                 # [P, j, l, k] = T_{j̄ l̄ k}
    d_Tb = np.conj(dT[:, 1])                         # ∂_i conj(T) = conj(∂_{ī} T)
    n_Tb = d_Tb - np.einsum("Prik,Pjlr->Pijlk", Gam, Tb)          # [P, i, j, l, k]

    Rjilk = R
    Rjkli = np.einsum("Pjkli->Pjilk", R)             # R_{j̄ k l̄ i} at slot (j,i,l,k)
    Rlijk = np.einsum("Plijk->Pjilk", R)             # R_{l̄ i j̄ k}
    Rlkji = np.einsum("Plkji->Pjilk", R)             # R_{l̄ k j̄ i}

    res1 = Rjilk - Rjkli + np.einsum("Pjikl->Pjilk", nb_T)
    res2 = Rjilk - Rlijk + np.einsum("Pijlk->Pjilk", n_Tb)
    rhs3a = -np.einsum("Pjikl->Pjilk", nb_T) - np.einsum("Pkjli->Pjilk", n_Tb)
    rhs3b = -np.einsum("Pijlk->Pjilk", n_Tb) - np.einsum("Plikj->Pjilk", nb_T)
    res3 = np.stack([Rjilk - Rlkji - rhs3a, Rjilk - Rlkji - rhs3b])

    # ∇_p R_{j̄ i l̄ k} = ∂_p R - Γ^r_{pi} R_{j̄ r l̄ k} - Γ^r_{pk} R_{j̄ i l̄ r}
    nR = (dR[:, 0]
          - np.einsum("Prpi,Pjrlk->Ppjilk", Gam, R)
          - np.einsum("Prpk,Pjilr->Ppjilk", Gam, R))
    lhs4 = nR - np.einsum("Pijplk->Ppjilk", nR)
    rhs4 = -np.einsum("Prpi,Pjrlk->Ppjilk", T_up, R)
    res4 = lhs4 - rhs4

    # ∇_{q̄} R_{j̄ i l̄ k} = ∂_{q̄} R - conj(Γ^s_{qj}) R_{s̄ i l̄ k} - conj(Γ^s_{ql}) R_{j̄ i s̄ k}
    nbR = (dR[:, 1]
           - np.einsum("Psqj,Psilk->Pqjilk", Gc, R)
           - np.einsum("Psql,Pjisk->Pqjilk", Gc, R))
    lhs5 = nbR - np.einsum("Pjqilk->Pqjilk", nbR)
    rhs5 = -np.einsum("Psqj,Psilk->Pqjilk", np.conj(T_up), R)
    res5 = lhs5 - rhs5

    return {"1": res1, "2": res2, "3": res3, "4": res4, "5": res5}


def residual_norms(residuals: dict) -> dict:
    return {k: float(np.max(np.abs(v))) for k, v in residuals.items()}


def calabi_quantity(chi: HermitianField, chi_hat: HermitianField, engine) -> np.ndarray:
    """S = |∇̂χ|²_χ, with Ψ^k_{ij} = Γ(χ)^k_{ij} - Γ(χ̂)^k_{ij} measured by χ."""
    G = engine.evaluate(_gamma(engine.source(chi), engine))
    Gh = engine.evaluate(_gamma(engine.source(chi_hat), engine))
    return calabi_from_connections(chi.values, G, Gh)


def calabi_from_connections(chi: np.ndarray, gamma: np.ndarray, gamma_hat: np.ndarray) -> np.ndarray:
    Psi = gamma - gamma_hat                          # [P, k, i, j]
    ci = np.linalg.inv(chi)
    S = np.einsum("Pia,Pjb,Pck,Pkij,Pcab->P", ci, ci, chi, Psi, np.conj(Psi))
    return S.real


def closedness_defect(g: HermitianField, h: HermitianField, engine) -> float:
    """Sup of |∂_i d_{k̄j} - ∂_j d_{k̄i}| for d = g - h (zero iff d(g - h) = 0)."""
    diff = engine.map(lambda a, b: a - b, engine.source(g), engine.source(h))
    T = engine.evaluate(_torsion_lowered(diff, engine))
    return float(np.max(np.abs(T))) if T.size else 0.0


def torsion_transfer_check(omega: HermitianField, omega0: HermitianField, engine,
                           *, scale: float = 1.0, tol: float = 1e-6) -> float:
    """Sup |T_{ijk̄}(ω) - scale·T_{ijk̄}(ω₀)| after checking d(ω - scale·ω₀) = 0."""
    ref = omega0.scaled(scale) if scale != 1.0 else omega0
    defect = closedness_defect(omega, ref, engine)
    if defect > tol:
        raise ValueError(f"ω - ω₀ is not closed (defect {defect:.3e} > {tol:g})")
    T = engine.evaluate(_torsion_lowered(engine.source(omega), engine))
    T0 = engine.evaluate(_torsion_lowered(engine.source(ref), engine))
    return float(np.max(np.abs(T - T0)))
