"""Sample domains and Hermitian matrix fields.

A field lives on a domain: either a periodic grid over some of the real
coordinates of C^n, or an explicit list of points. Values are stored with the
sample axis first, ``values[P, k, j] = g_{k̄ j}`` (row index barred).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

HERMITIAN_ATOL = 1e-12
SYMMETRIZE_WARN = 1e-10


class NotPositiveDefinite(ValueError):
    """Raised when a metric fails positivity at some sample point."""

    def __init__(self, index: int, eigenvalue: float):
        self.index = int(index)
        self.eigenvalue = float(eigenvalue)
        super().__init__(
            f"matrix at sample {self.index} is not positive definite "
            f"(smallest eigenvalue {self.eigenvalue:.3e})"
        )


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid over a subset of the 2n real coordinates.

    Real coordinate ``r`` means ``x_{r}`` for ``r < n`` and ``y_{r-n}``
    otherwise. Fields on the grid are constant along unsampled coordinates.
    """

    n: int
    shape: tuple
    lengths: tuple
    axes: tuple

    def __post_init__(self):
        if not (len(self.shape) == len(self.lengths) == len(self.axes)):
            raise ValueError("shape, lengths and axes must have equal length")
        if any(a < 0 or a >= 2 * self.n for a in self.axes):
            raise ValueError(f"axes must lie in [0, {2 * self.n})")

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacings(self) -> tuple:
        return tuple(L / N for L, N in zip(self.lengths, self.shape))

    def coordinates(self) -> np.ndarray:
        """Real coordinates of the grid, shape ``(P, len(axes))``."""
        ticks = [np.arange(N) * L / N for N, L in zip(self.shape, self.lengths)]
        mesh = np.meshgrid(*ticks, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def points(self) -> np.ndarray:
        """Grid as complex points, shape ``(P, n)``; unsampled coordinates are 0."""
        real = np.zeros((self.size, 2 * self.n))
        real[:, list(self.axes)] = self.coordinates()
        return real[:, : self.n] + 1j * real[:, self.n :]

    def cell_volume(self) -> float:
        return float(np.prod(self.spacings))

    def describe(self) -> dict:
        return {
            "kind": "periodic-grid",
            "n": self.n,
            "shape": list(self.shape),
            "lengths": list(self.lengths),
            "axes": list(self.axes),
        }


@dataclass(frozen=True)
class PointSet:
    """Explicit list of points in C^n."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=complex))
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def describe(self) -> dict:
        return {
            "kind": "point-set",
            "n": self.n,
            "points": [[[z.real, z.imag] for z in p] for p in self.points],
        }


@dataclass(frozen=True)
class SphereCells:
    """Cell-centred grid in x = cos θ on [-1, 1] for rotationally symmetric data."""

    N: int

    @property
    def n(self) -> int:
        return 1

    @property
    def size(self) -> int:
        return self.N

    @property
    def dx(self) -> float:
        return 2.0 / self.N

    def centers(self) -> np.ndarray:
        return -1.0 + (np.arange(self.N) + 0.5) * self.dx

    def faces(self) -> np.ndarray:
        return -1.0 + np.arange(self.N + 1) * self.dx

    def describe(self) -> dict:
        return {"kind": "sphere-cells", "N": self.N}


def _hermitian_part(values: np.ndarray) -> np.ndarray:
    return 0.5 * (values + np.conj(np.swapaxes(values, -1, -2)))


def symmetrize(values: np.ndarray, *, warn: float = SYMMETRIZE_WARN) -> np.ndarray:
    """Return the Hermitian part, logging a warning if the input was far from it."""
    values = np.asarray(values, dtype=complex)
    sym = _hermitian_part(values)
    gap = float(np.max(np.abs(values - sym))) if values.size else 0.0
    if gap > warn:
        log.warning("symmetrizing field with Hermitian asymmetry %.3e", gap)
    return sym


def check_positive(values: np.ndarray) -> None:
    """Raise :class:`NotPositiveDefinite` at the first offending sample."""
    eig = np.linalg.eigvalsh(values)
    low = eig[:, 0]
    bad = np.flatnonzero(~(low > 0))
    if bad.size:
        i = bad[0]
        raise NotPositiveDefinite(i, low[i])


@dataclass(frozen=True)
class HermitianField:
    """Positive-definite Hermitian matrix field ``g_{k̄j}`` over a domain.

    On point sets the generating closure ``func`` is kept so that derivatives
    can be taken by finite differences; on grids the sampled values suffice.
    """

    values: np.ndarray
    domain: object
    func: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim == 2:
            vals = vals[None]
        if vals.ndim != 3 or vals.shape[1] != vals.shape[2]:
            raise ValueError(f"expected values of shape (P, n, n), got {vals.shape}")
        if vals.shape[0] != self.domain.size:
            raise ValueError("value count does not match the domain size")
        vals = symmetrize(vals)
        check_positive(vals)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.values.shape[-1]

    @classmethod
    def from_function(cls, func, domain: PointSet) -> "HermitianField":
        """Sample a closure ``func(Z) -> (P, n, n)`` on a point set."""
        return cls(func(domain.points), domain, func)

    def scaled(self, c: float) -> "HermitianField":
        f = self.func
        return HermitianField(
            c * self.values, self.domain, None if f is None else (lambda Z: c * f(Z))
        )

    def to_json(self) -> str:
        return json.dumps(snapshot(self), separators=(",", ":"))


def invert(g: HermitianField) -> np.ndarray:
    """Pointwise inverse, ``ginv[P, j, k] = g^{j k̄}``.

    The input is positive definite by construction, so a Cholesky-based solve
    is safe; the product with ``g`` is the identity to rounding.
    """
    return inverse_values(g.values)


def inverse_values(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values)
    eig = np.linalg.eigvalsh(values)
    bad = np.flatnonzero(~(eig[..., 0] > 0))
    if bad.size:
        raise NotPositiveDefinite(bad[0], eig.reshape(-1, eig.shape[-1])[bad[0], 0])
    inv = np.linalg.inv(values)
    return _hermitian_part(inv)


def snapshot(g: HermitianField, **extra) -> dict:
    """JSON-ready snapshot: dimension, domain and ``[re, im]`` matrix entries."""
    vals = g.values
    body = {
        "dim": g.dim,
        "domain": g.domain.describe(),
        "values": [
            [[[float(v.real), float(v.imag)] for v in row] for row in mat] for mat in vals
        ],
    }
    body.update(extra)
    return body


def from_snapshot(data: dict) -> HermitianField:
    dom = data["domain"]
    if dom["kind"] == "periodic-grid":
        domain = PeriodicGrid(
            dom["n"], tuple(dom["shape"]), tuple(dom["lengths"]), tuple(dom["axes"])
        )
    elif dom["kind"] == "sphere-cells":
        domain = SphereCells(dom["N"])
    else:
        pts = np.array([[complex(a, b) for a, b in p] for p in dom["points"]])
        domain = PointSet(pts)
    arr = np.array(data["values"], dtype=float)
    return HermitianField(arr[..., 0] + 1j * arr[..., 1], domain)


def torus_grid(n: int, N: int | Sequence[int], length: float = 2 * math.pi) -> PeriodicGrid:
    """Grid over ``Re z_1, ..., Re z_n`` of the square torus (fields invariant in Im z)."""
    shape = tuple([N] * n) if np.isscalar(N) else tuple(N)
    return PeriodicGrid(n, shape, tuple([length] * len(shape)), tuple(range(len(shape))))
