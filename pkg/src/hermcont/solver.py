"""Newton continuation in t for scalar reductions of the continuity equation.

Two variants are supported:

``unnormalized``
    ω = ω₀ - t Ric ω, written as ω = ω₀ - t Ric ω₀ + i∂∂̄φ with
    F(φ) = t log(ωⁿ/ω₀ⁿ) - φ = 0 and φ(0) = 0.
``normalized``
    (t+1)ω = ω₀ - t Ric ω, written as ω = ω̂ + i∂∂̄φ, ω̂ = (ω_ref + tα_Ω)/(t+1),
    with F(φ) = (t+1)φ - φ₀ - t log(K ωⁿ/Ω) = 0 and φ(0) = φ₀.

Backends are a flat torus sampled on a periodic grid (potentials depend on
Re z only) and rotationally symmetric metrics on the Riemann sphere in the
coordinate x = cos θ.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded
from scipy.sparse.linalg import LinearOperator, gmres

from .chern import chern_curvature
from .differentiation import SpectralDifference
from .fields import HermitianField, NotPositiveDefinite, SphereCells, snapshot, torus_grid

log = logging.getLogger(__name__)

VARIANTS = ("unnormalized", "normalized")


class NewtonFailure(RuntimeError):
    """Newton did not converge, or the positivity line search ran out."""

    def __init__(self, t: float, reason: str):
        self.t = float(t)
        self.reason = reason
        super().__init__(f"t = {t:.9g}: {reason}")


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    max_newton: int = 30
    damping: float = 0.5
    max_backtracks: int = 40
    t_schedule: tuple = (0.0,)
    bisect_rtol: float = 1e-3
    linear_rtol: float = 1e-10
    polish_steps: int = 2

    def __post_init__(self):
        sched = tuple(float(t) for t in self.t_schedule)
        object.__setattr__(self, "t_schedule", sched)
        if self.newton_tol <= 0 or self.max_newton <= 0 or self.bisect_rtol <= 0:
            raise ValueError("solver tolerances and iteration counts must be positive")
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0, 1)")
        if not sched:
            raise ValueError("t_schedule must not be empty")
        if sched[0] < 0:
            raise ValueError("t_schedule must start at t >= 0")
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("t_schedule must be strictly increasing")


def t_schedule(start: float, end: float, count: int, spacing: str = "log") -> tuple:
    """Schedule from ``start`` to ``end``; log spacing prepends 0 when ``start`` is 0."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if count == 1:
        return (float(start),)
    if spacing == "linear":
        return tuple(np.linspace(start, end, count).tolist())
    if spacing != "log":
        raise ValueError("spacing must be 'log' or 'linear'")
    if start == 0:
        return (0.0,) + tuple(np.geomspace(min(1e-3, end), end, count - 1).tolist())
    return tuple(np.geomspace(start, end, count).tolist())


# -- torus ------------------------------------------------------------------------

class TorusBackend:
    """Flat square torus with potentials depending on Re z_1, ..., Re z_n.

    For such u the form i∂∂̄u has matrix ¼ ∂²u/∂x_j∂x_k, so all metrics are
    real symmetric on the grid and the reference ω_ref is the identity.
    """

    kind = "torus-spectral"

    def __init__(self, n: int, N: int, phi0=None, length: float = 2 * math.pi):
        if n not in (1, 2):
            raise ValueError("the torus backend supports n = 1 or n = 2")
        self.n = n
        self.grid = torus_grid(n, N, length)
        self.engine = SpectralDifference(self.grid)
        self.X = self.grid.coordinates()
        if phi0 is None:
            self.phi0 = np.zeros(self.grid.size)
        elif callable(phi0):
            self.phi0 = np.asarray(phi0(self.X), dtype=float).reshape(self.grid.size)
        else:
            self.phi0 = np.asarray(phi0, dtype=float).reshape(self.grid.size)
        self.reference = np.broadcast_to(np.eye(n), (self.grid.size, n, n)).copy()
        self.omega0 = self.reference + self.hess(self.phi0)
        self._check(self.omega0, "initial metric")
        self.logdet0 = np.log(np.linalg.det(self.omega0))
        self.ric0 = -self.hess(self.logdet0)
        self.log_Omega = np.zeros(self.grid.size)
        self._symbols()

    def _symbols(self):
        ks = [self.engine._k[a] for a in range(self.n)]
        mesh = np.meshgrid(*ks, indexing="ij")
        self._kk = [m.ravel() for m in mesh]

    def hess(self, u: np.ndarray) -> np.ndarray:
        d = [self.engine.partial(u, a) for a in range(self.n)]
        out = np.empty((u.shape[0], self.n, self.n))
        for j in range(self.n):
            for k in range(j, self.n):
                v = 0.25 * self.engine.partial(d[j], k)
                out[:, j, k] = v
                out[:, k, j] = v
        return out

    def laplacian(self, ginv: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.einsum("Pjk,Pjk->P", ginv, self.hess(u))

    @staticmethod
    def _check(om, what):
        low = np.linalg.eigvalsh(om)[:, 0]
        bad = np.flatnonzero(~(low > 0))
        if bad.size:
            raise NotPositiveDefinite(bad[0], low[bad[0]])

    def reference_metric(self, t: float, variant: str) -> np.ndarray:
        """ω̂(t): the metric the potential is measured from."""
        if variant == "normalized":
            return self.reference / (t + 1)
        return self.omega0 - t * self.ric0

    def comparison_metric(self, t: float, variant: str) -> np.ndarray:
        """Positive reference for equivalence estimates."""
        return self.reference / (t + 1) if variant == "normalized" else self.reference

    def initial_phi(self, variant: str) -> np.ndarray:
        return self.phi0.copy() if variant == "normalized" else np.zeros(self.grid.size)

    def omega(self, phi, t, variant):
        return self.reference_metric(t, variant) + self.hess(phi)

    def volume_constant(self, t: float) -> float:
        return (t + 1.0) ** self.n

    def residual(self, phi, t, variant):
        om = self.omega(phi, t, variant)
        self._check(om, "ω")
        if variant == "normalized":
            # log K + log det ω = log det((t+1)ω) since K = (t+1)^n; exact on the flat solution
            logdet = np.log(np.linalg.det((t + 1) * om))
            F = (t + 1) * phi - self.phi0 - t * (logdet - self.log_Omega)
        else:
            F = t * (np.log(np.linalg.det(om)) - self.logdet0) - phi
        return F, om

    def solve_linear(self, om, t, variant, rhs, rtol):
        ginv = np.linalg.inv(om)
        if variant == "normalized":
            a, b = -t, t + 1.0          # J = (t+1) - tΔ
        else:
            a, b = t, -1.0              # J = tΔ - 1
        gbar = ginv.mean(axis=0)
        sym = -0.25 * sum(gbar[j, k] * self._kk[j] * self._kk[k]
                          for j in range(self.n) for k in range(self.n))
        pre = 1.0 / (a * sym + b)
        shape = self.grid.shape

        def prec(v):
            return np.fft.ifftn(pre.reshape(shape) * np.fft.fftn(v.reshape(shape))).real.ravel()

        P = self.grid.size
        J = LinearOperator((P, P), matvec=lambda v: a * self.laplacian(ginv, v) + b * v, dtype=float)
        M = LinearOperator((P, P), matvec=prec, dtype=float)
        x, info = gmres(J, rhs, rtol=rtol, atol=0.0, restart=80, maxiter=50, M=M)
        if info != 0:
            raise NewtonFailure(t, f"linear solve did not converge (gmres info {info})")
        return x

    def maximal_time(self) -> float:
        return math.inf

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(f) * self.grid.cell_volume())

    def field(self, om: np.ndarray) -> HermitianField:
        return HermitianField(om, self.grid)

    def scalar_curvature(self, om: np.ndarray) -> np.ndarray:
        return chern_curvature(self.field(om), self.engine).scalar

    def volume_density(self, om: np.ndarray) -> np.ndarray:
        return np.real(np.linalg.det(om))

    def describe(self) -> dict:
        return {"backend": self.kind, "n": self.n, "grid": list(self.grid.shape)}


# -- sphere -----------------------------------------------------------------------

class SphereBackend:
    """Rotationally symmetric metrics on the Riemann sphere, n = 1.

    With x = cos θ and the round metric ω_round of curvature 1, the initial
    metric is ω₀ = ρ(x) ω_round where ρ = m' for the momentum profile m.
    The operator L f = ((1 - x²) f')' is the round Laplacian; it is discretised
    by finite volumes with zero flux at the poles, so Σ L f dx = 0 exactly.
    Metrics are stored as densities relative to ω_round.
    """

    kind = "sphere-symmetric"

    def __init__(self, N: int = 256, rho=None, scale: float = 1.0):
        self.n = 1
        self.cells = SphereCells(N)
        x = self.cells.centers()
        self.x = x
        if rho is None:
            r = np.ones(N)
        elif callable(rho):
            r = np.asarray(rho(x), dtype=float)
        else:
            r = np.polynomial.polynomial.polyval(x, np.asarray(rho, dtype=float))
        self.rho = scale * r
        if np.any(self.rho <= 0):
            raise ValueError("the momentum profile must be strictly increasing (ρ = m' > 0)")
        dx = self.cells.dx
        xf = self.cells.faces()
        a = (1 - xf ** 2) / dx ** 2
        a[0] = a[-1] = 0.0
        self._lo, self._hi = a[:-1], a[1:]
        self.R0 = self.curvature_of(self.rho)

    def L(self, f: np.ndarray) -> np.ndarray:
        flux = np.zeros(f.size + 1)
        flux[1:-1] = self._hi[:-1] * np.diff(f)       # differences keep L(const) = 0 exactly
        return flux[1:] - flux[:-1]

    def curvature_of(self, density: np.ndarray) -> np.ndarray:
        """Gauss curvature of density·ω_round, which equals the Chern scalar curvature."""
        return (1 - 0.5 * self.L(np.log(density))) / density

    def reference_metric(self, t, variant):
        return self.rho * (1 - t * self.R0)

    def comparison_metric(self, t: float, variant: str) -> np.ndarray:
        T = self.maximal_time()
        return (self.rho * max(1 - t / T, 1e-300))[:, None, None]

    def initial_phi(self, variant):
        return np.zeros(self.cells.N)

    def ratio(self, phi, t):
        return 1 - t * self.R0 + self.L(phi) / (2 * self.rho)

    def omega(self, phi, t, variant):
        return (self.rho * self.ratio(phi, t))[:, None, None]

    def residual(self, phi, t, variant):
        A = self.ratio(phi, t)
        bad = np.flatnonzero(~(A > 0))
        if bad.size:
            raise NotPositiveDefinite(bad[0], A[bad[0]] * self.rho[bad[0]])
        return t * np.log(A) - phi, (self.rho * A)[:, None, None]

    def solve_linear(self, om, t, variant, rhs, rtol):
        A = om[:, 0, 0].real / self.rho
        s = t / (2 * self.rho * A)
        N = self.cells.N
        ab = np.zeros((3, N))
        ab[1] = -s * (self._lo + self._hi) - 1.0
        ab[0, 1:] = (s * self._hi)[:-1]
        ab[2, :-1] = (s * self._lo)[1:]
        return solve_banded((1, 1), ab, rhs)

    def maximal_time(self) -> float:
        """∫ω₀ / ∫Ric ω₀ by midpoint quadrature in x."""
        dx = self.cells.dx
        return float(np.sum(self.rho) * dx / (np.sum(self.rho * self.R0) * dx))

    def integrate(self, f):
        return float(np.sum(f) * self.cells.dx * 2 * math.pi)

    def field(self, om):
        return HermitianField(om, self.cells)

    def scalar_curvature(self, om):
        return self.curvature_of(om[:, 0, 0].real)

    def volume_density(self, om):
        return om[:, 0, 0].real

    @property
    def omega0(self):
        return self.rho[:, None, None]

    def describe(self):
        return {"backend": self.kind, "n": 1, "grid": [self.cells.N]}


# -- problem and states ----------------------------------------------------------

@dataclass(frozen=True)
class ScalarProblem:
    variant: str
    backend: object

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if isinstance(self.backend, SphereBackend) and self.variant != "unnormalized":
            raise ValueError("the sphere backend implements the unnormalized equation only")

    @property
    def n(self) -> int:
        return self.backend.n


@dataclass(frozen=True)
class ContinuityState:
    t: float
    phi: np.ndarray
    omega: HermitianField
    residual_norm: float
    newton_iters: int
    history: tuple = ()

    def snapshot(self) -> dict:
        return snapshot(self.omega, t=self.t, residual_norm=self.residual_norm,
                        newton_iters=self.newton_iters,
                        phi=[float(v) for v in self.phi])


def _norm(F) -> float:
    return float(np.max(np.abs(F)))


def scalar_residual(state: ContinuityState, problem: ScalarProblem) -> np.ndarray:
    F, _ = problem.backend.residual(state.phi, state.t, problem.variant)
    return F


def _make_state(problem, t, phi, iters, history):
    F, om = problem.backend.residual(phi, t, problem.variant)
    return ContinuityState(t=float(t), phi=phi, omega=problem.backend.field(om),
                           residual_norm=_norm(F), newton_iters=iters, history=tuple(history))


def newton_step(state: ContinuityState, problem: ScalarProblem, config: SolverConfig) -> ContinuityState:
    """One damped Newton update; ω stays positive and the residual strictly drops."""
    be, t, var = problem.backend, state.t, problem.variant
    F, om = be.residual(state.phi, t, var)
    r0 = _norm(F)
    if r0 == 0.0:
        return replace(state, residual_norm=0.0)
    delta = be.solve_linear(om, t, var, -F, config.linear_rtol)
    s = 1.0
    for _ in range(config.max_backtracks):
        trial = state.phi + s * delta
        try:
            Ft, omt = be.residual(trial, t, var)
        except NotPositiveDefinite:
            s *= config.damping
            continue
        r = _norm(Ft)
        if r < r0:
            return ContinuityState(t=t, phi=trial, omega=be.field(omt), residual_norm=r,
                                   newton_iters=state.newton_iters + 1,
                                   history=state.history + (r,))
        s *= config.damping
    raise NewtonFailure(t, "positivity line search exhausted (near-degenerate metric)")


def residual_scale(state: ContinuityState, variant: str) -> float:
    """Size of the terms making up F, which sets its rounding floor.

    Unnormalized: t log(ωⁿ/ω₀ⁿ) and φ, where ω itself is the difference of
    t Ric ω₀ and i∂∂̄φ, giving (1 + t)(1 + sup|φ|). Normalized: (t+1)φ and φ₀
    stay bounded, giving 1 + (t + 1) sup|φ|.
    """
    sup = float(np.max(np.abs(state.phi))) if state.phi.size else 0.0
    if variant == "normalized":
        return 1.0 + (state.t + 1.0) * sup
    return (1.0 + state.t) * (1.0 + sup)


def converged(state: ContinuityState, config: SolverConfig, variant: str) -> bool:
    return state.residual_norm <= config.newton_tol * residual_scale(state, variant)


def solve_at(problem: ScalarProblem, t: float, guess: np.ndarray, config: SolverConfig) -> ContinuityState:
    try:
        state = _make_state(problem, t, np.array(guess, dtype=float), 0, ())
    except NotPositiveDefinite as exc:
        raise NewtonFailure(t, f"initial guess not positive: {exc}") from None
    state = replace(state, history=(state.residual_norm,))
    while not converged(state, config, problem.variant):
        if state.newton_iters >= config.max_newton:
            raise NewtonFailure(t, f"no convergence in {config.max_newton} iterations "
                                   f"(residual {state.residual_norm:.3e})")
        state = newton_step(state, problem, config)
    # polish down to the rounding floor; derived quantities such as curvature
    # differentiate φ and amplify whatever residual is left
    for _ in range(config.polish_steps):
        try:
            nxt = newton_step(state, problem, config)
        except NewtonFailure:
            break
        if nxt.residual_norm > 0.5 * state.residual_norm:
            break
        state = nxt
    return state


@dataclass
class ContinuationResult:
    states: list = field(default_factory=list)
    failure_time: Optional[float] = None
    failure_reason: Optional[str] = None

    @property
    def completed(self) -> bool:
        return self.failure_time is None

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])


def _guess(states, t):
    if len(states) >= 2 and states[-1].t > states[-2].t:
        a, b = states[-2], states[-1]
        return b.phi + (t - b.t) / (b.t - a.t) * (b.phi - a.phi)
    return states[-1].phi.copy()


def _try(problem, t, states, config):
    guesses = [_guess(states, t), states[-1].phi.copy()] if states else [problem.backend.initial_phi(problem.variant)]
    err = None
    for g in guesses:
        try:
            return solve_at(problem, t, g, config)
        except NewtonFailure as exc:
            err = exc
    raise err


def continue_in_t(problem: ScalarProblem, config: SolverConfig) -> ContinuationResult:
    """Solve along the schedule; on failure bisect to the empirical maximal time."""
    res = ContinuationResult()
    for t in config.t_schedule:
        try:
            res.states.append(_try(problem, t, res.states, config))
            continue
        except NewtonFailure as exc:
            reason = exc.reason
        if not res.states:
            res.failure_time, res.failure_reason = t, reason
            return res
        lo, hi = res.states[-1].t, t
        while (hi - lo) > config.bisect_rtol * hi:
            mid = 0.5 * (lo + hi)
            try:
                res.states.append(_try(problem, mid, res.states, config))
                lo = mid
            except NewtonFailure as exc:
                hi, reason = mid, exc.reason
        res.failure_time, res.failure_reason = hi, reason
        log.info("continuation stopped near t = %.6g (%s)", hi, reason)
        return res
    return res


def maximal_time(problem: ScalarProblem) -> float:
    return problem.backend.maximal_time()


def normalization_constant(state: ContinuityState, problem: ScalarProblem) -> float:
    """Relative mismatch of ∫exp(((t+1)φ - φ₀)/t) Ω and K ∫ωⁿ for the normalized variant."""
    if problem.variant != "normalized":
        raise ValueError("normalization applies to the normalized variant")
    t = state.t
    if t <= 0:
        raise ValueError("the normalization is defined for t > 0")
    be = problem.backend
    lhs = be.integrate(np.exp(((t + 1) * state.phi - be.phi0) / t + be.log_Omega))
    rhs = be.volume_constant(t) * be.integrate(be.volume_density(state.omega.values))
    return abs(lhs - rhs) / abs(rhs)
