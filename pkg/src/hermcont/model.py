"""Oeljeklaus-Toma model forms on H^{n-1} x C in global coordinates.

Points are complex arrays ``Z[P, :]`` with ``Z[:, :n-1] = z`` (upper half
planes, ``y_j = Im z_j > 0``) and ``Z[:, n-1] = w``. Forms are returned as
Hermitian matrices ``[P, k̄, j]`` in the frame ``(dz_1, ..., dz_{n-1}, dw)``;
densities of top-degree forms are relative to ``Π_j i dz^j∧dz̄^j ∧ i dw∧dw̄``.

The form ``γ`` is the full double sum over ``j, k`` including ``j = k``; with
that reading ``ω_OT = α + β + γ`` is positive and ``Ric(ω_OT) = -α``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .chern import chern_curvature
from .differentiation import CentralDifference, ddbar
from .fields import HermitianField, PointSet

Form = Callable[[np.ndarray], np.ndarray]


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class ModelPoint:
    z: tuple
    w: complex

    def __post_init__(self):
        if any(np.imag(zj) <= 0 for zj in self.z):
            raise DomainError("ModelPoint needs Im z_j > 0 for all j")

    @property
    def n(self) -> int:
        return len(self.z) + 1

    def as_array(self) -> np.ndarray:
        return np.array(list(self.z) + [self.w], dtype=complex)


def _y(Z: np.ndarray) -> np.ndarray:
    y = np.asarray(Z)[:, :-1].imag
    if np.any(y <= 0):
        raise DomainError("point outside the upper half-space (Im z_j <= 0)")
    return y


def _check_n(n: int):
    if n < 2:
        raise ValueError("the OT model needs complex dimension n >= 2")


def alpha(Z: np.ndarray) -> np.ndarray:
    y = _y(Z)
    P, m = y.shape
    out = np.zeros((P, m + 1, m + 1), dtype=complex)
    idx = np.arange(m)
    out[:, idx, idx] = 1.0 / (4 * y ** 2)
    return out


def beta(Z: np.ndarray) -> np.ndarray:
    y = _y(Z)
    P, m = y.shape
    out = np.zeros((P, m + 1, m + 1), dtype=complex)
    out[:, m, m] = np.prod(y, axis=1)
    return out


def gamma(Z: np.ndarray) -> np.ndarray:
    y = _y(Z)
    P, m = y.shape
    v = 1.0 / (2 * y)
    out = np.zeros((P, m + 1, m + 1), dtype=complex)
    out[:, :m, :m] = v[:, :, None] * v[:, None, :]
    return out


def omega_ot(Z: np.ndarray) -> np.ndarray:
    return alpha(Z) + beta(Z) + gamma(Z)


def omega_density(Z: np.ndarray) -> np.ndarray:
    """Ω = α^{n-1}∧β as a density: (n-1)! Π_j 1/(4 y_j)."""
    y = _y(Z)
    m = y.shape[1]
    return math.factorial(m) * np.prod(1.0 / (4 * y), axis=1)


@dataclass(frozen=True)
class ModelForms:
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    omega_OT: np.ndarray
    Omega_density: np.ndarray


def evaluate_forms(points, n: int | None = None) -> ModelForms:
    """α, β, γ, ω_OT and the density of Ω at the given points."""
    Z = _as_points(points)
    if n is not None and Z.shape[1] != n:
        raise ValueError(f"points have dimension {Z.shape[1]}, expected {n}")
    _check_n(Z.shape[1])
    return ModelForms(alpha(Z), beta(Z), gamma(Z), omega_ot(Z), omega_density(Z))


def _as_points(points) -> np.ndarray:
    if isinstance(points, ModelPoint):
        return points.as_array()[None]
    if isinstance(points, PointSet):
        return points.points
    return np.atleast_2d(np.asarray(points, dtype=complex))


def sample_points(n: int, count: int = 1000, seed: int = 0,
                  y_range=(0.5, 2.0), x_half: float = 1.0, w_radius: float = 1.0) -> PointSet:
    """Quasi-random points with y in a box, |Re z| <= x_half and |w| <= w_radius."""
    _check_n(n)
    m = n - 1
    sob = qmc.Sobol(d=2 * m + 2, scramble=True, seed=seed)
    u = sob.random(count)
    x = (2 * u[:, :m] - 1) * x_half
    y = y_range[0] + (y_range[1] - y_range[0]) * u[:, m:2 * m]
    r = w_radius * np.sqrt(u[:, 2 * m])
    th = 2 * np.pi * u[:, 2 * m + 1]
    Z = np.concatenate([x + 1j * y, (r * np.exp(1j * th))[:, None]], axis=1)
    return PointSet(Z)


def model_engine(points: PointSet, order: int = 6, step: float = 5e-3) -> CentralDifference:
    """Finite differences with spacing proportional to min_j y_j (scale-invariant geometry)."""
    return CentralDifference(points, order=order, step=step,
                             scale=lambda Z: np.min(np.asarray(Z)[:, :-1].imag, axis=1))


# -- wedge products ---------------------------------------------------------------

def wedge_density(*mats: np.ndarray) -> np.ndarray:
    """Density of A_1∧...∧A_n by brute-force expansion over index permutations.

    Equals n! times the mixed discriminant; for equal arguments it is n! det A.
    """
    n = mats[0].shape[-1]
    if len(mats) != n:
        raise ValueError("need exactly n forms for a top-degree wedge")
    mats = [np.asarray(m) for m in mats]
    perms = list(itertools.permutations(range(n)))
    sign = {p: np.linalg.det(np.eye(n)[list(p)]).round() for p in perms}
    total = 0
    for s in perms:
        for t in perms:
            term = sign[s] * sign[t]
            for i in range(n):
                term = term * mats[i][..., s[i], t[i]]
            total = total + term
    return np.real(total)


def binomial_wedges(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Densities of binom(n, k) A^k∧B^{n-k} for k = 0..n, shape ``[P, n+1]``.

    From det(A + sB) = det A · Π(1 + s μ_i), μ the eigenvalues of A^{-1}B, so the
    coefficient of s^{n-k} is det A · e_{n-k}(μ). A must be positive definite.
    """
    A, B = np.atleast_3d(A), np.atleast_3d(B)
    n = A.shape[-1]
    mu = np.linalg.eigvals(np.linalg.solve(A, B))
    e = np.array([np.real(np.poly(m)) for m in mu])        # Π(x - μ) -> (-1)^k e_k
    e = e * (-1.0) ** np.arange(n + 1)
    detA = np.real(np.linalg.det(A))
    out = math.factorial(n) * detA[:, None] * e[:, ::-1]   # column k <- e_{n-k}
    return out


# -- checks -----------------------------------------------------------------------

def check_ddbar_log_Omega(points, engine=None) -> float:
    """Sup-norm of i∂∂̄ log Ω - α over the sample."""
    Z = _as_points(points)
    _check_n(Z.shape[1])
    pts = PointSet(Z)
    eng = engine or model_engine(pts)
    form = ddbar(lambda X: np.log(omega_density(X)), eng)
    return float(np.max(np.abs(eng.evaluate(form) - alpha(Z))))


def ricci_residual(metric: Form, target: np.ndarray, points, engine=None) -> float:
    pts = points if isinstance(points, PointSet) else PointSet(_as_points(points))
    eng = engine or model_engine(pts)
    cd = chern_curvature(HermitianField.from_function(metric, pts), eng)
    return float(np.max(np.abs(cd.ricci_first - target)))


@dataclass(frozen=True)
class FlatnessReport:
    is_flat: bool
    c: float
    spread: float


def strongly_flat_check(candidate: Form, points, tol: float = 1e-8) -> FlatnessReport:
    """Is g_{w̄w} = c · y_1⋯y_{n-1} for one constant c across the sample?"""
    Z = _as_points(points)
    g = candidate(Z)
    ratio = g[:, -1, -1].real / np.prod(_y(Z), axis=1)
    c = float(np.mean(ratio))
    spread = float((ratio.max() - ratio.min()) / abs(c)) if c else np.inf
    return FlatnessReport(is_flat=bool(spread < tol and c > 0), c=c, spread=spread)


def conformal_normalize(candidate: Form, c: float = 1.0) -> Form:
    """ω ↦ (cΩ / α^{n-1}∧ω) ω, which makes g_{w̄w} = c · y_1⋯y_{n-1}."""

    def normalized(Z):
        g = candidate(Z)
        denom = g[:, -1, -1].real
        if np.any(denom <= 0):
            raise ValueError("α^{n-1}∧ω vanishes at a sample point")
        factor = c * np.prod(_y(Z), axis=1) / denom
        return factor[:, None, None] * g

    return normalized


def weakly_parallel_check(theta: Form, points, engine=None, tol: float = 1e-8) -> bool:
    """True when sup |∂_w Θ_{w̄w}| < tol over the sample."""
    Z = _as_points(points)
    pts = PointSet(Z)
    eng = engine or CentralDifference(pts, order=6, step=1e-2)
    d = eng.evaluate(eng.gradient(lambda X: theta(X)[:, -1, -1]))
    return bool(np.max(np.abs(d[:, 0, -1])) < tol)


# -- explicit solution family -----------------------------------------------------

@dataclass(frozen=True)
class ReferenceFamily:
    """ω̂(t) = (ω̂₀ + tα)/(t+1) built on a strongly flat ω̂₀ with constant c."""

    hat_omega0: Form
    c: float
    n: int

    @classmethod
    def from_metric(cls, hat_omega0: Form = omega_ot, n: int = 2, points=None):
        pts = points if points is not None else sample_points(n, 64, seed=1)
        rep = strongly_flat_check(hat_omega0, pts)
        if not rep.is_flat:
            raise ValueError(f"initial metric is not strongly flat (spread {rep.spread:.2e})")
        return cls(hat_omega0, rep.c, n)

    def hat_omega(self, t: float) -> Form:
        if t < 0:
            raise ValueError("t must be nonnegative")
        return lambda Z: (self.hat_omega0(Z) + t * alpha(Z)) / (t + 1)

    def f_coeffs(self, Z) -> np.ndarray:
        """f_1, ..., f_{n-1} at each point, shape ``[P, n-1]``."""
        Z = _as_points(Z)
        n = Z.shape[1]
        wedges = binomial_wedges(self.hat_omega0(Z), alpha(Z))   # column k: binom(n,k) ω̂₀^k∧α^{n-k}
        return wedges[:, 2:] / (self.c * n * omega_density(Z))[:, None]

    def potential(self, t: float, Z) -> np.ndarray:
        """Normalized potential of ω̂(t) itself: (t/(t+1)) log(1 + Σ f_k / t^k)."""
        if t == 0:
            return np.zeros(_as_points(Z).shape[0])
        f = self.f_coeffs(Z)
        k = np.arange(1, f.shape[1] + 1)
        return t / (t + 1) * np.log1p(np.sum(f / t ** k, axis=1))


def explicit_solution_residual(t: float, points, family: ReferenceFamily | None = None,
                               engine=None) -> float:
    """Sup-norm of (t+1)ω̂ - ω̂₀ + t Ric ω̂ with Ric by finite differences."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    Z = _as_points(points)
    fam = family or ReferenceFamily(omega_ot, 1.0, Z.shape[1])
    pts = PointSet(Z)
    hat = fam.hat_omega(t)
    if t == 0:
        return float(np.max(np.abs(hat(Z) - fam.hat_omega0(Z))))
    eng = engine or model_engine(pts)
    ric = chern_curvature(HermitianField.from_function(hat, pts), eng).ricci_first
    res = (t + 1) * hat(Z) - fam.hat_omega0(Z) + t * ric
    return float(np.max(np.abs(res)))


_STRETCH_FACTORS = {"alpha": alpha, "beta": beta, "gamma": gamma}


@dataclass(frozen=True)
class PullbackReport:
    factor: float
    max_rel_error: float


def stretch(Z: np.ndarray, t: float) -> np.ndarray:
    """λ_t(z, w) = (z, sqrt(t+1) w)."""
    out = np.array(Z, dtype=complex)
    out[:, -1] *= np.sqrt(t + 1)
    return out


def leaf_stretch_pullback(t: float, form: str, points=None) -> PullbackReport:
    """Exact pullback factor of α, β, γ under λ_t, checked by a frame change.

    λ_t* Θ at p is J^H Θ(λ_t p) J with J = diag(1, ..., 1, sqrt(t+1)).
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if form not in _STRETCH_FACTORS:
        raise ValueError(f"form must be one of {sorted(_STRETCH_FACTORS)}")
    factor = t + 1.0 if form == "beta" else 1.0
    if points is None:
        points = sample_points(2, 50, seed=3)
    Z = _as_points(points)
    theta = _STRETCH_FACTORS[form]
    J = np.ones(Z.shape[1])
    J[-1] = np.sqrt(t + 1)
    pulled = theta(stretch(Z, t)) * J[None, :, None] * J[None, None, :]
    base = factor * theta(Z)
    scale = np.maximum(np.max(np.abs(base), axis=(1, 2)), 1e-300)
    err = np.max(np.abs(pulled - base), axis=(1, 2)) / scale
    return PullbackReport(factor=factor, max_rel_error=float(np.max(err)))


def stretched_reference(t: float) -> Form:
    """λ_t* ω̂(t) = α + β + γ/(t+1) for the family starting at ω_OT."""
    return lambda Z: alpha(Z) + beta(Z) + gamma(Z) / (t + 1)


@dataclass(frozen=True)
class ExpansionReport:
    lhs: np.ndarray
    rhs: np.ndarray
    f: np.ndarray
    log_bound_gap: np.ndarray     # f_1 + ... + f_{n-1} - t log(lhs) >= 0

    @property
    def max_abs_error(self) -> float:
        return float(np.max(np.abs(self.lhs - self.rhs)))


def expansion_coefficients(t: float, points, family: ReferenceFamily | None = None) -> ExpansionReport:
    """(t+1)^n/(c n t^{n-1}) · ω̂^n/Ω against 1 + f_1/t + ... + f_{n-1}/t^{n-1}."""
    if t < 1:
        raise ValueError("the expansion bound is stated for t >= 1")
    Z = _as_points(points)
    n = Z.shape[1]
    fam = family or ReferenceFamily(omega_ot, 1.0, n)
    hat = fam.hat_omega(t)(Z)
    eig = np.linalg.eigvalsh(hat)
    if np.any(eig[:, 0] <= 0):
        raise ValueError("ω̂(t) must be positive definite")
    vol = math.factorial(n) * np.real(np.linalg.det(hat))
    lhs = (t + 1) ** n / (fam.c * n * t ** (n - 1)) * vol / omega_density(Z)
    f = fam.f_coeffs(Z)
    k = np.arange(1, n)
    rhs = 1 + np.sum(f / t ** k, axis=1)
    gap = np.sum(f, axis=1) - t * np.log(lhs)
    return ExpansionReport(lhs=lhs, rhs=rhs, f=f, log_bound_gap=gap)


def normalization_mismatch(t: float, family: ReferenceFamily | None = None, *, n: int = 2,
                           phi: Form | None = None, phi0: Form | None = None,
                           omega: Form | None = None, y_box=(0.5, 2.0), nodes: int = 16) -> float:
    """Relative gap between ∫exp(((t+1)φ - φ₀)/t) Ω and (t+1)^n/(c n t^{n-1}) ∫ω^n.

    Integrals run over a box of fundamental-domain type by Gauss-Legendre
    quadrature in y; the integrands are invariant under translations of Re z
    and w, so those directions contribute a common volume factor that cancels.
    ``phi`` defaults to the normalized potential of the family and ``omega``
    to ω̂(t), which is correct whenever ``phi`` is constant in space.
    """
    if t <= 0:
        raise ValueError("the normalization is defined for t > 0")
    fam = family or ReferenceFamily(omega_ot, 1.0, n)
    n = fam.n
    m = n - 1
    x, w = np.polynomial.legendre.leggauss(nodes)
    a, b = y_box
    y1 = 0.5 * (b - a) * x + 0.5 * (b + a)
    w1 = 0.5 * (b - a) * w
    grids = np.meshgrid(*([y1] * m), indexing="ij")
    weights = np.prod(np.meshgrid(*([w1] * m), indexing="ij"), axis=0).ravel()
    Z = np.zeros((weights.size, n), dtype=complex)
    Z[:, :m] = 1j * np.stack([g.ravel() for g in grids], axis=1)
    ph = fam.potential(t, Z) if phi is None else np.asarray(phi(Z), dtype=float)
    ph0 = np.zeros(len(Z)) if phi0 is None else np.asarray(phi0(Z), dtype=float)
    om = (omega or fam.hat_omega(t))(Z)
    lhs = np.sum(weights * np.exp(((t + 1) * ph - ph0) / t) * omega_density(Z))
    vol = math.factorial(n) * np.real(np.linalg.det(om))
    rhs = (t + 1) ** n / (fam.c * n * t ** (n - 1)) * np.sum(weights * vol)
    return float(abs(lhs - rhs) / abs(rhs))
