"""Hypothesis strategies shared by the property tests."""

import numpy as np
from hypothesis import strategies as st


@st.composite
def pd_matrices(draw, n=None, count=1, floor=0.05):
    """Hermitian positive-definite batches ``[count, n, n]`` with bounded conditioning."""
    n = n if n is not None else draw(st.integers(1, 3))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(count, n, n)) + 1j * rng.normal(size=(count, n, n))
    return A @ np.conj(np.swapaxes(A, -1, -2)) + floor * np.eye(n)


seeds = st.integers(0, 2**32 - 1)


def random_pd(rng, n, count=1, floor=0.1):
    A = rng.normal(size=(count, n, n)) + 1j * rng.normal(size=(count, n, n))
    return A @ np.conj(np.swapaxes(A, -1, -2)) + floor * np.eye(n)
