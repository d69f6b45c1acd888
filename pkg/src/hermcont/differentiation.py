"""Wirtinger differentiation of fields.

Two engines share one small interface used by the tensor code:

``gradient(field)``
    returns a field with two extra axes after the sample axis,
    ``out[P, 0, j, ...] = ∂_j f`` and ``out[P, 1, k, ...] = ∂_{k̄} f``.
``map(fn, *fields)``
    pointwise combination of fields.
``evaluate(field)``
    the field's values at the engine's sample points, shape ``(P, ...)``.

Grid fields are plain arrays. Point-set fields are closures ``Z -> values``
so that finite differences can nest to any depth.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .fields import HermitianField, PeriodicGrid, PointSet


@lru_cache(maxsize=None)
def central_weights(order: int) -> tuple:
    """Offsets and weights of the central first-derivative stencil of given even order."""
    if order < 2 or order % 2:
        raise ValueError("order must be an even integer >= 2")
    p = order // 2
    pos = [(-1) ** (m + 1) * math.factorial(p) ** 2
           / (m * math.factorial(p - m) * math.factorial(p + m)) for m in range(1, p + 1)]
    offsets = tuple(float(m) for m in range(-p, 0)) + tuple(float(m) for m in range(1, p + 1))
    weights = tuple(-w for w in reversed(pos)) + tuple(pos)
    return offsets, weights


class CentralDifference:
    """Central finite differences of configurable order on a point set.

    ``step`` is the absolute spacing unless ``scale`` is given, in which case
    the spacing at a point ``Z`` is ``step * scale(Z)``.
    """

    kind = "central-fd"

    def __init__(self, domain: PointSet, order: int = 4, step: float = 1e-3,
                 scale=None, chunk: int = 8):
        self.domain = domain
        self.order = order
        self.step = float(step)
        self.scale = scale
        self.chunk = chunk
        off, w = central_weights(order)
        self._offsets = np.array(off)
        self._weights = np.array(w)

    def __repr__(self):
        return f"CentralDifference(order={self.order}, step={self.step:g})"

    def with_step(self, step: float) -> "CentralDifference":
        return CentralDifference(self.domain, self.order, step, self.scale, self.chunk)

    def source(self, g: HermitianField):
        if g.func is None:
            raise ValueError("point-set metrics need a generating closure for differentiation")
        return g.func

    def constant(self, values):
        values = np.asarray(values)
        return lambda Z: np.broadcast_to(values, (Z.shape[0],) + values.shape)

    def map(self, fn, *fields):
        return lambda Z: fn(*(f(Z) for f in fields))

    def gradient(self, f):
        offsets, weights = self._offsets, self._weights
        step, scale = self.step, self.scale

        def grad(Z):
            Z = np.asarray(Z, dtype=complex)
            M, n = Z.shape
            h = step if scale is None else step * np.asarray(scale(Z)).reshape(M)
            h = np.broadcast_to(np.asarray(h, dtype=float), (M,))
            dirs = np.concatenate([np.eye(n), 1j * np.eye(n)])  # x_j then y_j
            shifts = dirs[:, None, :] * offsets[None, :, None]  # (2n, K, n)
            pts = Z[:, None, None, :] + h[:, None, None, None] * shifts[None]
            vals = np.asarray(f(pts.reshape(-1, n)))
            tail = vals.shape[1:]
            vals = vals.reshape((M, 2 * n, len(offsets)) + tail)
            d = np.tensordot(vals, weights, axes=([2], [0]))  # (M, 2n, *tail)
            d = d / h.reshape((M, 1) + (1,) * len(tail))
            dx, dy = d[:, :n], d[:, n:]
            return np.stack([0.5 * (dx - 1j * dy), 0.5 * (dx + 1j * dy)], axis=1)

        return grad

    def evaluate(self, f):
        Z = self.domain.points
        parts = [np.asarray(f(Z[i:i + self.chunk])) for i in range(0, len(Z), self.chunk)]
        return np.concatenate(parts, axis=0)


class SpectralDifference:
    """Fourier differentiation on a :class:`PeriodicGrid`."""

    kind = "spectral-periodic"

    def __init__(self, grid: PeriodicGrid):
        self.domain = grid
        self._k = []
        for N, L in zip(grid.shape, grid.lengths):
            k = 2 * np.pi * np.fft.fftfreq(N, d=L / N)
            if N % 2 == 0:
                k[N // 2] = 0.0  # odd derivatives drop the Nyquist mode
            self._k.append(k)

    def __repr__(self):
        return f"SpectralDifference(shape={self.domain.shape})"

    def source(self, g: HermitianField):
        return g.values

    def constant(self, values):
        values = np.asarray(values)
        return np.broadcast_to(values, (self.domain.size,) + values.shape).copy()

    def map(self, fn, *fields):
        return fn(*fields)

    def partial(self, f, axis: int) -> np.ndarray:
        """Derivative along grid axis ``axis`` of a flattened field ``(P, ...)``."""
        grid = self.domain
        f = np.asarray(f)
        tail = f.shape[1:]
        arr = f.reshape(grid.shape + tail)
        shape = [1] * arr.ndim
        shape[axis] = grid.shape[axis]
        ik = (1j * self._k[axis]).reshape(shape)
        out = np.fft.ifft(ik * np.fft.fft(arr, axis=axis), axis=axis)
        if np.isrealobj(f):
            out = out.real
        return out.reshape(f.shape)

    def real_gradient(self, f) -> np.ndarray:
        """All 2n real partials, shape ``(P, 2n, ...)``; unsampled directions are 0."""
        grid = self.domain
        f = np.asarray(f)
        out = np.zeros((f.shape[0], 2 * grid.n) + f.shape[1:], dtype=complex)
        for ax, r in enumerate(grid.axes):
            out[:, r] = self.partial(f, ax)
        return out

    def gradient(self, f):
        n = self.domain.n
        d = self.real_gradient(f)
        dx, dy = d[:, :n], d[:, n:]
        return np.stack([0.5 * (dx - 1j * dy), 0.5 * (dx + 1j * dy)], axis=1)

    def evaluate(self, f):
        return np.asarray(f)


def make_engine(domain, scheme: str = "auto", order: int = 4, step: float = 1e-3, scale=None):
    """Engine matching ``domain``: spectral on grids, central differences on point sets."""
    if isinstance(domain, PeriodicGrid):
        if scheme not in ("auto", "spectral-periodic"):
            raise ValueError("periodic grids support only the spectral scheme")
        return SpectralDifference(domain)
    if scheme not in ("auto", "central-fd"):
        raise ValueError("point sets support only central finite differences")
    return CentralDifference(domain, order=order, step=step, scale=scale)


def ddbar(func, engine):
    """Closure for the (1,1)-form ``i∂∂̄ψ`` of a scalar closure, as ``(P, k, j) = ∂_j∂_{k̄}ψ``."""
    g1 = engine.gradient(func)
    g2 = engine.gradient(engine.map(lambda a: a[:, 1], g1))  # (P, 2, j, k): ∂_j ∂_{k̄}
    return engine.map(lambda a: np.swapaxes(a[:, 0], 1, 2), g2)
